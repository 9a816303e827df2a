"""Universal contextual-bandit learning rules, process generators and a simulation harness."""

from .bandits import Exp3, Exp3IX, Exp3IXLearner, Exp3Learner, ExpInf, ExpInfLearner, expinf_period_of
from .core import (ActionSpace, BaseLearner, ContextPoint, RewardSample, SeededRng, greedy_net,
                   lex_argmax)
from .policy_net import Policy, PolicyEnumeration, density_gap, enumerate_policy
from .processes import (DeterministicWalk, FiniteSupport, IidFinite, IidFresh, MarkovChain,
                        Partition, dedup_times, distinct_cell_curve, empirical_submeasure,
                        infrequent_mass, read_trace, write_trace)
from .rewards import (BernoulliTable, LipschitzUC, Needle, TentContinuous, ZeroMeanUnbounded,
                      optimal_policy)
from .universal import UniversalFiniteRule, category, period_of, period_start
from .variants import (ContinuousRule, CountableActionRule, NetParams, UcNetRule, UnboundedRule,
                       net_scan)

__version__ = "0.1.0"

__all__ = [
    "ActionSpace", "BaseLearner", "BernoulliTable", "ContextPoint", "ContinuousRule",
    "CountableActionRule", "DeterministicWalk", "Exp3", "Exp3IX", "Exp3IXLearner", "Exp3Learner",
    "ExpInf", "ExpInfLearner", "FiniteSupport", "IidFinite", "IidFresh", "LipschitzUC",
    "MarkovChain", "Needle", "NetParams", "Partition", "Policy", "PolicyEnumeration",
    "RewardSample", "SeededRng", "TentContinuous", "UcNetRule", "UnboundedRule",
    "UniversalFiniteRule", "ZeroMeanUnbounded", "category", "dedup_times", "density_gap",
    "distinct_cell_curve", "empirical_submeasure", "enumerate_policy", "expinf_period_of",
    "greedy_net", "infrequent_mass", "lex_argmax", "net_scan", "optimal_policy", "period_of",
    "period_start", "read_trace", "write_trace",
]
