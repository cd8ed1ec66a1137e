"""Compositional sum-product tree regression over univariate basis functions."""

from .basis import BasisFunction, BasisSet, ensemble_basis, from_spec, standard_catalog
from .estimator import CompositionalTreeRegressor
from .solver import Dataset, FitConfig, coordinate_descent, fit, path_constants, predict, risk, solve_insertion
from .tree import Leaf, Model, Op, deserialize, evaluate, flatten, m_f, serialize

__version__ = "0.1.0"
