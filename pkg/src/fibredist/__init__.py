"""Distribution-aware electrospun fibre diameter prediction toolkit."""

import warnings

# numba probes optional threading layers on import; an outdated system TBB
# is expected here and the fallback layer is fine
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

__version__ = "0.1.0"
