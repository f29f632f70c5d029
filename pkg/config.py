import os

from dotenv import load_dotenv

load_dotenv()

ENV_PREFIX = 'GRASPFORGE_'

# Database Configuration
DATABASE_URL = os.getenv('GRASPFORGE_DATABASE_URL')  # None -> sqlite file inside the run directory

# Workspace Configuration
WORKSPACE_WIDTH_MM = 480.0
WORKSPACE_HEIGHT_MM = 480.0
PX_PER_MM = 0.85
BACKGROUND_LEVEL = 0.92  # dull white table-top

# Gripper Configuration (stock parallel gripper)
GRIPPER_MAX_OPEN_MM = 75.0
GRIPPER_MIN_CLOSE_MM = 37.0
JAW_LENGTH_MM = 20.0
JAW_THICKNESS_MM = 8.0
JAW_CLEARANCE_MM = 0.01

# Object Configuration
FRICTION_HALF_ANGLE_DEG = 15.0
MAX_PLACEMENT_REJECTIONS = 500
SHAPES_PER_FAMILY = 12
LIBRARY_SEED = 1234
NOVEL_FRACTION_OF_LIBRARY = 0.25
TEST_FRACTION_OF_LIBRARY = 0.25

# Trial Collection Configuration
OBJECTS_PER_SCENE = 10
SCENE_REFRESH_MIN_OBJECTS = 3
MAX_TRIALS_PER_SCENE = 60
COLLECTION_TRIALS = 2000
COLLECTION_SHARDS = 4
REMOVE_ON_SUCCESS = True

# Patch Configuration
PATCH_SCALE = 1.5
PATCH_INPUT_SIDE = 48
FULL_INPUT_SIDE = 227
NUM_ANGLE_BINS = 18
BIN_WIDTH_DEG = 10.0
AUGMENT_COPIES = 4
AUGMENT_BIN_ALIGNED = True

# Network Configuration
CONV_CHANNELS = (8, 16, 32)
CONV_KERNEL = 3
FC_WIDTHS = (256, 64)
HEAD_INIT_STD = 0.01

# Training Configuration
BATCH_SIZE = 64
GRADIENT_CHUNKS = 4  # fixed split of each batch, independent of the worker count
MOMENTUM = 0.9
STAGE0_LEARNING_RATE = 0.01
STAGE0_EPOCHS = 20
STAGEK_LEARNING_RATE = 0.001
STAGEK_EPOCHS = 5
PRETRAIN_LEARNING_RATE = 0.01
PRETRAIN_EPOCHS = 5
PRETRAIN_SAMPLES = 1200

# Staged Learning Configuration
PRIOR_PATCHES = 800
IMPORTANCE_GAMMA = 3
IMPORTANCE_FLOOR = 1e-3
IMPORTANCE_LAW = 'proportional'
STAGE_TRIALS = 400
STAGE_NOVEL_FRACTION = 0.5
NUM_STAGES = 3

# Baseline Configuration
HOG_CELL = 8
HOG_BINS = 9
KNN_K_GRID = (1, 3, 5, 9, 15, 25)
SVM_C_GRID = (0.01, 0.1, 1.0, 10.0)
SVM_EPOCHS = 200
SVM_VALIDATION_FRACTION = 0.2
HEURISTIC_THRESHOLD_GRID = (5.0, 10.0, 15.0, 20.0, 30.0, 45.0, 60.0, 90.0)
HEURISTIC_LIMIT_GRID_PX = (0.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0, 32.0)
HEURISTIC_DEFAULT_THRESHOLD_DEG = 15.0

# Evaluation Configuration
TEST_INTERACTIONS = 3000
RERANK_TOP_K = 10
RERANK_NEIGHBORS = 10
RERANK_RADIUS_MM = 5.0
EXECUTION_JITTER_MM = 2.0
GRASP_RATE_TRIES = 150
CLUTTER_OBJECTS = 10
CLUTTER_RUNS = 5
CLUTTER_INTERACTION_CAP = 200
ABLATION_SIZES = (500, 1000, 2000, 5000, 10000)
ABLATION_SEEDS = (0, 1, 2)

# System Configuration
SEED = int(os.getenv('GRASPFORGE_SEED', '0'))
WORKERS = int(os.getenv('GRASPFORGE_WORKERS', '1'))
LOG_LEVEL = os.getenv('GRASPFORGE_LOG_LEVEL', 'INFO')
