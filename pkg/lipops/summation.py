####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     summation.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+, numpy
#
####################################################################################################

import math

import numpy as np


def ordered_sum(values):
    """ Exactly rounded sum of a complex (or real) 1-D array, taken in index order """
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real.tolist()), math.fsum(values.imag.tolist()))
    return complex(math.fsum(values.tolist()), 0.0)

