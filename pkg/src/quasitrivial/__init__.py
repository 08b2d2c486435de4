"""Symbolic verification and constructive trivialization of deformed
one-component bihamiltonian structures of hydrodynamic type."""

from .jetring import (
    EPS,
    JetExpr,
    degree,
    integrate_total,
    log,
    order,
    partial_jet,
    phi,
    total_derivative,
    u,
    variational_derivative,
)
from .multivec import (
    DiffOp,
    EvoVectorField,
    KernelBivector,
    LocalFunctional,
    ThetaDensity,
    are_compatible,
    d,
    hydrodynamic_pencil,
    is_poisson,
    schouten,
)
from .parse import ParseError, parse_expr
from .quasitriv import (
    HydroPencil,
    NotExact,
    d_invert,
    lemma1_reduce,
    lemma2_extract,
    lemma3_lhs,
    lemma4_lhs,
    proposition1_solve,
    trivialize,
)
from .series import EpsSeries
from .transform import MiuraTransform, compose, invert_transform, pushforward

__version__ = "0.1.0"
