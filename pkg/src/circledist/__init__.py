"""Circle diffeomorphisms, Birkhoff sums and invariant distributions."""

from .angles import Convergent, IrrationalAngle, cf_expand, convergents
from .circlemaps import (CircleMap, Regularity, arnold, conjugated_rotation, from_denjoy,
                         iterate, rotation, rotation_interval, tune_parameter)
from .denjoy import AtomicMeasure, DenjoyMap, GapLaw, build_denjoy, orbit_weights
from .ergodic import TestFunction, birkhoff_sum, corollary_experiment, herman_check, mu_mean
from .cohomology import (InvariantDistribution, lemma_defect, lemma_identity_residual,
                         mean_correct, solve_rotation_coboundary, w_hat)

__version__ = "0.1.0"
