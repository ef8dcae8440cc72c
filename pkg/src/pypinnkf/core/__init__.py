# ---- Package imports ----
from .enums import *
from .structures import *
from .constants import *
from .io import _PROBLEM_ALIASES, _MODE_ALIASES, _VARIANT_ALIASES, _parse_problem, _parse_mode, _parse_variant, _parse_eta, _parse_eta_list, _parse_seed_list, load_flat_toml, dump_flat_toml
from .utilities import seed_sequence, make_rng, spawn_generators, tensor_grid, sha256_file
from .models import *

# External imports to the core modules
from ..tools.logger import *

__all__ = [ # io module
            "_PROBLEM_ALIASES", "_MODE_ALIASES", "_VARIANT_ALIASES", "_parse_problem", "_parse_mode", "_parse_variant", "_parse_eta", "_parse_eta_list", "_parse_seed_list", "load_flat_toml", "dump_flat_toml",
            # utilities module
            "seed_sequence", "make_rng", "spawn_generators", "tensor_grid", "sha256_file",
        ]
