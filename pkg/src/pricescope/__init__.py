"""Price-manipulation detection for single DeFi transactions."""

from .chain import load_trace
from .inference import InferenceBackendConfig
from .patterns import AttackFinding, AttackPattern, match_patterns
from .pipeline import DetectConfig, DetectionReport, detect

__version__ = "0.1.0"
