# -*- coding: utf-8 -*-

# Define self package variable
__version__ = "0.3.0"
__description__ = "Attribute-controlled peptide generation by latent space rejection sampling, with in-silico screening"
