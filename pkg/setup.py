#!/usr/bin/env python3
# -*- coding: utf-8 -*-

from setuptools import setup

# Define package info
name = "pepCLaSS"
description = "Attribute-controlled peptide generation by latent space rejection sampling, with in-silico screening"
with open("README.md", "r") as fh:
    long_description = fh.read()

# Collect info in a dictionnary for setup.py
setup(
    name=name,
    description=description,
    version="0.3.0",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/pepclass/pepCLaSS",
    author="pepCLaSS developers",
    license="MIT",
    python_requires=">=3.8",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Bio-Informatics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3"
    ],
    install_requires=[
        "numpy>=1.22.2",
        "scipy>=1.8.0",
        "pandas>=1.4.1",
        "torch>=1.11.0",
        "nltk>=3.7",
        "Jinja2>=3.0.3",
        "plotly>=5.6.0",
        "pyfaidx>=0.6.4",
        "tqdm>=4.62.3",
        "colorlog>=6.6.0"
    ],
    packages=["pepCLaSS", "pepCLaSS.models", "pepCLaSS.analysis"],
    package_dir={"pepCLaSS": "pepCLaSS", "pepCLaSS.models": "pepCLaSS/models", "pepCLaSS.analysis": "pepCLaSS/analysis"},
    package_data={name: ["templates/*", "data/*"]},
    entry_points={"console_scripts": ["pepclass=pepCLaSS.__main__:main", "pepCLaSS=pepCLaSS.__main__:main"]},
)
