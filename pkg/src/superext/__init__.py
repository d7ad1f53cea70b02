"""Exact computations with polynomial superfunctors over F_p, p >= 3.

Subpackages:
    ffield      exact dense/sparse linear algebra mod p
    superspace  super vector spaces, parity series
    multilinear signed tensor powers, divided/symmetric powers, Q_d
    schur       Schur superalgebras and functor evaluation
    additive    additivity test and classification
    extengine   free resolutions and Ext dimensions
    yoneda      symbolic Ext presentations and identity checkers
    parametrize parametrisation of classical functors by graded spaces
    cli         batch command line driver
"""

__version__ = "0.1.0"
