####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     errors.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+
#
####################################################################################################


class LipOpsException(Exception):
    """ Base class for every error raised by the toolkit on bad input or bad data """
    pass


class SchemaError(LipOpsException):
    def __init__(self, message, field=None):
        LipOpsException.__init__(self, message)
        self.field = field


class SpaceError(LipOpsException):
    def __init__(self, message, index=None):
        LipOpsException.__init__(self, message)
        self.index = index


class MetricAxiomError(SpaceError):
    """ A distance table breaks symmetry, positivity or the triangle inequality.
    `ids` holds the offending pair (x, y) or triple (x, y, z). """
    def __init__(self, message, axiom, ids):
        SpaceError.__init__(self, message)
        self.axiom = axiom
        self.ids = tuple(ids)


class DegenerateSpaceError(SpaceError):
    def __init__(self, message, num_points=None):
        SpaceError.__init__(self, message)
        self.num_points = num_points


class ParameterRangeError(LipOpsException):
    def __init__(self, message, name=None, value=None):
        LipOpsException.__init__(self, message)
        self.name = name
        self.value = value


class KernelError(LipOpsException):
    pass


class OperatorError(LipOpsException):
    pass


class ConvergenceError(LipOpsException):
    def __init__(self, message, iterations=None, last_estimate=None):
        LipOpsException.__init__(self, message)
        self.iterations = iterations
        self.last_estimate = last_estimate


class UsageError(LipOpsException):
    pass
