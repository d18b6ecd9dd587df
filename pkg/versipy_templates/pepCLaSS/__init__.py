# -*- coding: utf-8 -*-

# Define self package variable
__version__ = "__package_version__"
__description__ = "__package_description__"
