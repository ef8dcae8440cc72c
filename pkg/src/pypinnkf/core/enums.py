"""
    Module: PyPinnKF_Enums
    ----------------------
    This module contains enum definitions used in the PyPinnKF project.
"""

from enum import Enum, IntEnum

class E_Problem(Enum):
    BURGERS     = "burgers"
    TFMDWE      = "tfmdwe"

class E_Mode(Enum):
    FORWARD     = "forward"
    INVERSE     = "inverse"

class E_Variant(Enum):
    ADAM        = "adam"        # ADAM-trained PINN baseline
    NSGA3       = "nsga3"       # NSGA-III trained PINN baseline
    MOPINNENKF  = "mopinnenkf"  # NSGA-III ensemble + EnKF outer loop

class E_Derivative(Enum):
    U       = "u"
    U_T     = "u_t"
    U_X     = "u_x"
    U_XX    = "u_xx"

class E_Dominance(Enum):
    NONE    = 0 # incomparable, or a is worse somewhere
    WEAK    = 1 # a <= b componentwise
    STRICT  = 2 # weak, and a < b in at least one component

class E_TaskKind(Enum):
    NULL        = -1
    REFINE      = 0 # memetic ADAM refinement of one individual
    EVALUATE    = 1 # objective evaluation of one genome

class E_ExitCode(IntEnum):
    OK          = 0
    CONFIG      = 2
    DIVERGENCE  = 3
    IO          = 4
