"""Verify properties of additive tree ensembles with an SMT solver.

The library encodes an ensemble of binary trees plus a user question as an
SMT formula over linear real arithmetic and solves it with a prune /
divide-and-conquer strategy: branches unreachable under the current
subdomain are removed, a timed solver call answers the shrunken problem, and
timeouts split the input domain on the condition that kills the most
reachable leaves. Results stream per subdomain: concrete witness instances
for sat, proven-impossible boxes for unsat, and still-open boxes otherwise.
"""

from .domain import (
    BoolDomain,
    DomainBox,
    RealInterval,
    Relation,
    contains,
    refine,
    relation,
    unconstrained,
)
from .errors import (
    ParseError,
    ProtocolError,
    SolverUnavailable,
    TooLarge,
    TreeVerifyError,
    UnsupportedQuestion,
    ValidationError,
)
from .model import (
    BOOL,
    REAL,
    BoolIsTrue,
    Ensemble,
    Internal,
    Leaf,
    LessThan,
    Tree,
    collect_splits,
    evaluate,
    evaluate_exact,
    from_xgboost_dump,
    leaf_count,
    load_ensemble,
    save_ensemble,
    validate_ensemble,
)
from .question import (
    TRUE,
    And,
    AttrVar,
    AuxVar,
    BoolVar,
    Cmp,
    Implies,
    LinExpr,
    Not,
    Or,
    OutputVar,
    VerificationTask,
    adversarial_task,
    attr,
    aux_bool,
    aux_real,
    bool_attr,
    box_approximation,
    eq,
    ge,
    gt,
    le,
    lt,
    margin_from_probability,
    monotonicity_task,
    one_diff_pair_task,
    out,
    satisfies_task,
    single_instance_question,
    task_from_json,
    task_to_json,
    validate,
)
from .reduce import PrunedEnsemble, best_split, prune, unreachable_leaf_count
from .search import Checkpoint, SearchConfig, SubproblemReport, Summary, resume, run
from .solver import SolverVerdict, decode_model, default_solver_cmd, solve

__version__ = "0.1.0"
