"""Configuration settings for a3kit annotation, dataset generation, primitives and evaluation."""

import math

# Camera Settings (simulation camera of the real-world alignment setup)
IMAGE_WIDTH = 960  # Rendered image width in pixels
IMAGE_HEIGHT = 960  # Rendered image height in pixels
FOCAL_PX = 1000.0  # Focal length in pixels (fx = fy)
Z_EPS = 1e-6  # Points with camera depth <= Z_EPS are behind the camera
MIN_DEPTH_SPAN = 1e-3  # Minimum z_max - z_min for a scene depth range (meters)

# URDF / Sampling Settings
DEFAULT_SAMPLE_COUNT = 2048  # Surface points per link
CYLINDER_SECTIONS = 32  # Tessellation of URDF <cylinder> primitives
CONTINUOUS_RANGE = (-math.pi, math.pi)  # Effective range of continuous joints

# Annotation Settings
VISIBILITY_MIN = 0.25  # Minimum visible fraction for a link to be annotated
ZBUFFER_RES = 480  # Triangle z-buffer resolution (square)
ZBUFFER_DEPTH_TOL = 1e-3  # Absolute depth slack of the occlusion test (meters)
ZBUFFER_REL_TOL = 1e-3  # Depth slack per meter of point depth
DEGENERATE_HALF_EXTENT = 1e-4  # Floor for box half-extents (meters)
BOX_INFLATE = 1e-6  # Containment slack for box checks (meters)

# Dataset Settings
VIEWS_PER_OBJECT = 40  # Views rendered per object at full scale
CAMERA_RADIUS_FACTOR = (1.5, 3.0)  # Camera distance in object radii
CAMERA_ELEVATION_DEG = (-15.0, 60.0)  # Camera elevation range
CAMERA_AZIMUTH_DEG = (0.0, 360.0)  # Camera azimuth range
CLOSED_FRACTION = 0.5  # Travel fraction at or below which a joint counts as closed
TASK_MULTIPLIERS = {"Detection": 1, "RECLink": 1, "REGJoint": 1, "RECAction": 1}
IMAGE_DIR = "images"  # Relative image reference root for the external renderer

# Primitive Settings
ARC_DEG = 30.0  # Rotate/Scroll sweep per attempt
SLIDE_M = 0.1  # Slide distance cap (meters)
N_WAYPOINTS = 16  # Waypoints per trajectory
CONTACT_SHRINK = 0.75  # Fraction of the two largest half-extents kept for contact choice
CONTACT_MARGIN = 0.01  # Evaluator padding of a parsed box along its smallest extent (meters)
SCROLL_LEXICON = ("cap", "bottle cap", "scroll button", "knob")

# Evaluation Settings
SIGMA = 0.01  # Success threshold on joint displacement (native units)
DETACH_EPS = 0.02  # Attachment breaks when the residual exceeds this (meters)
ATTACH_TOL = 0.005  # Contact must lie this close to the target link surface (meters)
ATTEMPTS = 2  # Forward and backward attempt
ORIENTATION_WEIGHT = 0.05  # Meters per radian when blending orientation into revolute steps
EVAL_RADIUS_FACTOR = (2.5, 3.0)  # Evaluation camera distance in object radii
EVAL_ELEVATION_DEG = (10.0, 40.0)  # Evaluation camera elevation range
EVAL_AZIMUTH_DEG = (-60.0, 60.0)  # Evaluation cameras stay in front of the object (+x)

# Answer Grammar Settings
GRAMMAR_VERSION = "a3-answer/1"
DECIMALS = 2

# Remote Endpoints
REMOTE_TIMEOUT = 30  # Timeout for remote requests in seconds
REMOTE_MAX_IN_FLIGHT = 4  # Concurrent in-flight requests per client
ORACLE_HOST = "localhost"  # Host for the oracle replay server
ORACLE_PORT = 8010  # Port for the oracle replay server
VLM_ENDPOINT = f"http://{ORACLE_HOST}:{ORACLE_PORT}/v1/predict"
SKILL_ENDPOINT = f"http://{ORACLE_HOST}:{ORACLE_PORT}/v1/skills"

# Runtime
THREADS_ENV = "A3KIT_THREADS"  # Caps worker processes
