####################################################################################################
#
#  Project:  Lipschitz Operators Toolkit (lipops)
#  File:     __main__.py
#  Authors:  The lipops authors
#
#  Requires: Python 3.6+
#
####################################################################################################

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
