"""Maximum likelihood estimation for sub-ballistic random walks in i.i.d. random environments."""

from .env_models import (
    Beta,
    EnvModel,
    NotTransientRight,
    Regime,
    RegimeReport,
    Temkin,
    TwoPoint,
    classify_regime,
    make_model,
    solve_kappa,
    temkin_benchmark,
    two_point_benchmark,
)
from .walk_sim import QuenchedEnv, WalkOutcome, Walker, default_t_max, gen_environment, run_to_hitting

__version__ = "0.1.0"
