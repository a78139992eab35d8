"""Real-time tactic coaching engine: an authoritative scene server with a
2D coach board protocol, cross-view projection math, rule-based drill
generation, deterministic recording/replay, and a simulated-network test
harness."""

from .scene import (Annotation, Arrow2D, Arrow3D, Command, Entity, Marker,
                    PitchSpec, Playback, Polyline, Pose, StateDelta,
                    TacticScene, Zone, apply_command, apply_delta,
                    initial_scene, scene_hash)
from .geometry import (BoardPoint, CameraParams, NdcPoint, billboard_size,
                       board_to_world, fpv_project, minimap_footprint,
                       select_visible_annotations, world_to_board)
from .motion import (DeviationReport, Formation, FormationSlot, MotionPlan,
                     TacticSequence, generate_transition, path_deviation,
                     retarget, sample_motion, sample_sequence)
from .hungarian import optimal_assignment
from .protocol import (ClockSample, Envelope, Role, authority_check,
                       decode_frame, encode_frame, estimate_clock_offset,
                       resolve_gap, session_transition)
from .session import ReplayCore, ServerConfig, SessionCore, replay_log
from .client import ClientCore
from .netsim import ConvergenceReport, LinkModel, generate_script, run_scenario

__version__ = "0.1.0"
