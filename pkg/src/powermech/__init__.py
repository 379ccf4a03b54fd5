"""Allocate scarce electric power among consumers with VCG-style mechanisms."""
from .engine import (Allocation, MechanismResult, OutcomeSolver, clarke_payment,
                     groves_payment, run_mechanism, social_choice)
from .errors import (BudgetExceeded, Infeasible, InvalidScenario, ParseError,
                     PowerMechError, Unbounded, ValidationError)
from .mechanisms import solver_for
from .model import (EPS, MechanismKind, PenaltyParams, PowerSeries, Scenario, UserProfile,
                    Violation, aggregate_demand, energy_of, headroom, validate_scenario)
from .oracle import (MisreportGrid, PropertyReport, brute_force_outcome, check_properties,
                     misreport_sweep)
from .scenario_io import generate_scenario, load_scenario, save_scenario, write_report

__version__ = "0.1.0"
