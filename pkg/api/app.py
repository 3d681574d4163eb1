# api/app.py
import json
import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

# ==============================
# Load environment variables
# ==============================
load_dotenv()

# ==============================
# Logging setup
# ==============================
logging.basicConfig(
    level=os.getenv("LELONG_LOG_LEVEL", "INFO").upper(),
    format="%(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger("LelongLab")

# ==============================
# Shipped fixtures (absolute paths)
# ==============================
BASE_DIR = Path(__file__).resolve().parent.parent
CONFIGS_DIR = (BASE_DIR / "configs").resolve()

FIXTURES = {
    "ex12": "ex12_polytope.json",
    "simplex2": "simplex2.json",
    "box2": "box2.json",
    "perera": "perera_polytope.json",
    "diagonal": "diagonal_segment.json",
    "hs_ex12": "hs_ex12.json",
    "tropical": "tropical.json",
    "polylog": "polylog.json",
    "grid": "grid.json",
    "op_b": "operator_b.json",
    "op_c": "operator_c.json",
    "dini": "dini_linear.json",
    "dini_rb": "dini_rb.json",
}

VERSION = "1.0.0"


def fixture_path(name: str) -> Path:
    """Absolute path of a shipped fixture; plain paths pass through unchanged."""
    if name in FIXTURES:
        return CONFIGS_DIR / FIXTURES[name]
    return Path(name)


def _load_fixture(path: Path, label: str) -> Optional[dict]:
    try:
        if not path.exists():
            raise FileNotFoundError(f"{label} not found at {path}")
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        logger.debug(f"✅ Loaded {label} from {path}")
        return data
    except Exception as e:
        logger.error(f"❌ Failed to load {label} from {path}: {e}")
        return None


# ==============================
# Health check
# ==============================
def describe() -> dict:
    """Status of the shipped fixtures and the active settings (the `fixtures` subcommand)."""
    from services.settings import Settings

    settings = Settings.from_env()
    loaded = {name: _load_fixture(fixture_path(name), name) is not None for name in FIXTURES}
    return {
        "status": "ok" if all(loaded.values()) else "degraded",
        "version": VERSION,
        "configs_dir": str(CONFIGS_DIR),
        "fixtures": loaded,
        "threads": settings.threads,
        "seed": settings.seed,
        "log_level": settings.log_level,
    }
