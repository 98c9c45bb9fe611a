####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     __init__.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+
#
####################################################################################################

__version__ = "0.1.0"
