import os
import sys
from pathlib import Path

from pydantic_settings import BaseSettings

__version__ = "1.0.0"


def _detect_root() -> Path:
    env_root = os.getenv('FLOORPLAN_ROOT')
    if env_root:
        return Path(env_root).expanduser()
    return Path(__file__).resolve().parent.parent.parent

ROOT = _detect_root()

def _load_env():
    p = ROOT / '.env'
    if not p.exists():
        return
    for line in p.read_text(encoding='utf-8').splitlines():
        if '=' in line and not line.strip().startswith('#'):
            k, v = line.split('=', 1)
            os.environ.setdefault(k.strip(), v.strip())

_load_env()


class Settings(BaseSettings):
    # Grid
    GRID_RESOLUTION: int = 256
    AXIS_TOLERANCE_PX: float = 3.0      # walls/openings off-axis slack
    WALL_THICKNESS_PX: int = 3          # render + semantic wall raster width

    # Heatmap rendering / extraction
    DISK_RADIUS_PX: float = 11.0
    PEAK_THRESHOLD: float = 0.5
    MIN_COMPONENT_AREA: int = 5         # components with area <= this are dropped
    WALL_SCORE_WIDTH: int = 7
    OPENING_SCORE_WIDTH: int = 5
    CORNER_WEIGHT_SCALE: float = 0.4    # corner weight = scale * (peak - 0.5)

    # Integer program
    CORNER_EXCLUSION_PX: float = 10.0
    ICON_EXCLUSION_IOU: float = 0.3
    BNB_NODE_LIMIT: int = 1_000_000

    # Metrics
    MATCH_DISTANCE_PX: float = 10.0
    ICON_MATCH_IOU: float = 0.5
    ROOM_MATCH_IOU: float = 0.7
    RELATION_MATCH_IOU: float = 0.5
    LINE_SAMPLES: int = 100

    # Point clouds
    OUTLIER_PERCENT: float = 2.5
    DOMAIN_MARGIN: float = 0.05
    SUBSAMPLE_POINTS: int = 50_000
    AUGMENT_SCALE_MIN: float = 0.5
    AUGMENT_SCALE_MAX: float = 1.5
    IMAGE_POOL_STRIDE: int = 10

    # Runtime
    VERBOSE: int = 0

    class Config:
        env_file = ".env"
        extra = "ignore"

# Global singleton
config = Settings()


def log(stage: str, msg: str):
    """Tagged progress line on stderr; stdout stays clean for command output."""
    if not config.VERBOSE:
        return
    print(f"[floorplan][{stage}] {msg}", file=sys.stderr)
