from .core import EpasClient
from .documents import parse_instance, serialize_instance, generate_instance
from .model import Infeasible, Instance, MetricSpace, Solution
from .solver import SolverConfig, epas_solve
