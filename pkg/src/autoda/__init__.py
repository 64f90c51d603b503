"""Automated discovery of decision-based adversarial attack programs.

A small typed DSL over scalars and vectors, a random program generator with
static and dynamic pruning, a slot-allocating compiler, a random-walk attack
engine with adaptive step sizes, pluggable decision oracles with exact query
accounting, and a deterministic parallel two-stage search.
"""

from .analysis import InputsCheckResult, dead_instructions, inputs_check, live_set
from .compiler import check_slots, compile_to_tac
from .engine import (
    AttackState,
    ControllerConfig,
    RunLog,
    StartPointError,
    attack,
    controller_f,
    controller_step,
    distance_test,
    distortion_ratio,
    find_start,
    make_distance_cases,
)
from .generate import GenConfig, gen_from_uniforms, gen_random
from .oracles import (
    DecisionOracle,
    HalfspaceOracle,
    MlpFormatError,
    MlpOracle,
    SphereOracle,
    load_mlp,
    parse_oracle_spec,
)
from .ops import Kind, Op
from .program import (
    EncodedProgram,
    Instruction,
    ProgramError,
    SsaProgram,
    TacInstruction,
    TacProgram,
    ValueId,
    run_ssa,
    run_tac,
    sid,
    vid,
)
from .reference import boundary_reference, noise_step_reference
from .rng import stream
from .search import SearchConfig, run_ablation, run_search
from .text import ParseError, format_program, format_tac, parse_program, parse_tac

__version__ = "0.1.0"

__all__ = [
    "Kind", "Op", "ValueId", "sid", "vid", "Instruction", "SsaProgram",
    "TacInstruction", "TacProgram", "EncodedProgram", "ProgramError",
    "run_ssa", "run_tac", "parse_program", "format_program", "parse_tac",
    "format_tac", "ParseError", "live_set", "dead_instructions",
    "inputs_check", "InputsCheckResult", "compile_to_tac", "check_slots",
    "GenConfig", "gen_random", "gen_from_uniforms", "stream",
    "ControllerConfig", "AttackState", "RunLog", "StartPointError",
    "controller_f", "controller_step", "find_start", "distance_test",
    "make_distance_cases", "attack", "distortion_ratio",
    "DecisionOracle", "HalfspaceOracle", "SphereOracle", "MlpOracle",
    "MlpFormatError", "load_mlp", "parse_oracle_spec",
    "boundary_reference", "noise_step_reference",
    "SearchConfig", "run_search", "run_ablation",
    "__version__",
]
