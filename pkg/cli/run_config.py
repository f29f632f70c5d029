"""
Run configuration
One frozen dataclass per section, defaults from config.py. A TOML file
overrides any subset; GRASPFORGE_<SECTION>__<KEY> environment variables
override the file.
"""

import dataclasses
import logging
import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

import config
from curriculum.prior import IMPORTANCE_LAWS
from errors import ConfigError
from learner.network import ARCHITECTURES
from simulator.models import GripperSpec, Workspace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WorkspaceSection:
    width_mm: float = config.WORKSPACE_WIDTH_MM
    height_mm: float = config.WORKSPACE_HEIGHT_MM
    px_per_mm: float = config.PX_PER_MM


@dataclass(frozen=True)
class GripperSection:
    max_open_mm: float = config.GRIPPER_MAX_OPEN_MM
    min_close_mm: float = config.GRIPPER_MIN_CLOSE_MM
    jaw_length_mm: float = config.JAW_LENGTH_MM
    jaw_thickness_mm: float = config.JAW_THICKNESS_MM


@dataclass(frozen=True)
class LibrarySection:
    seed: int = config.LIBRARY_SEED
    per_family: int = config.SHAPES_PER_FAMILY
    novel_fraction: float = config.NOVEL_FRACTION_OF_LIBRARY
    test_fraction: float = config.TEST_FRACTION_OF_LIBRARY


@dataclass(frozen=True)
class CollectionSection:
    n_trials: int = config.COLLECTION_TRIALS
    n_scenes: int = 20  # gen-scenes only
    objects_per_scene: int = config.OBJECTS_PER_SCENE
    refresh_min_objects: int = config.SCENE_REFRESH_MIN_OBJECTS
    max_trials_per_scene: int = config.MAX_TRIALS_PER_SCENE
    shards: int = config.COLLECTION_SHARDS
    remove_on_success: bool = config.REMOVE_ON_SUCCESS


@dataclass(frozen=True)
class PatchesSection:
    augment_copies: int = config.AUGMENT_COPIES
    bin_aligned: bool = config.AUGMENT_BIN_ALIGNED


@dataclass(frozen=True)
class ModelSection:
    architecture: str = 'desk'


@dataclass(frozen=True)
class TrainSection:
    batch_size: int = config.BATCH_SIZE
    momentum: float = config.MOMENTUM
    stage0_learning_rate: float = config.STAGE0_LEARNING_RATE
    stage0_epochs: int = config.STAGE0_EPOCHS
    stagek_learning_rate: float = config.STAGEK_LEARNING_RATE
    stagek_epochs: int = config.STAGEK_EPOCHS


@dataclass(frozen=True)
class PretrainSection:
    enabled: bool = True
    learning_rate: float = config.PRETRAIN_LEARNING_RATE
    epochs: int = config.PRETRAIN_EPOCHS
    samples: int = config.PRETRAIN_SAMPLES
    reinit_fc: bool = False


@dataclass(frozen=True)
class StageSection:
    n_stages: int = config.NUM_STAGES
    gamma: int = config.IMPORTANCE_GAMMA
    n_patches: int = config.PRIOR_PATCHES
    trials_per_stage: int = config.STAGE_TRIALS
    novel_fraction: float = config.STAGE_NOVEL_FRACTION
    floor: float = config.IMPORTANCE_FLOOR
    law: str = config.IMPORTANCE_LAW
    temperature: float = 1.0
    aggregate: bool = True


@dataclass(frozen=True)
class BaselinesSection:
    hog_cell: int = config.HOG_CELL
    hog_bins: int = config.HOG_BINS
    knn_k_grid: tuple = config.KNN_K_GRID
    svm_c_grid: tuple = config.SVM_C_GRID
    svm_epochs: int = config.SVM_EPOCHS
    svm_validation_fraction: float = config.SVM_VALIDATION_FRACTION
    heuristic_thresholds_deg: tuple = config.HEURISTIC_THRESHOLD_GRID
    heuristic_limits_px: tuple = config.HEURISTIC_LIMIT_GRID_PX


@dataclass(frozen=True)
class EvalSection:
    test_interactions: int = config.TEST_INTERACTIONS
    test_seed_offset: int = 1000
    balance: bool = True
    threshold: float = 0.5
    rerank_top_k: int = config.RERANK_TOP_K
    rerank_neighbors: int = config.RERANK_NEIGHBORS
    rerank_radius_mm: float = config.RERANK_RADIUS_MM
    rerank_same_bin: bool = False
    jitter_mm: float = config.EXECUTION_JITTER_MM
    grasp_rate_tries: int = config.GRASP_RATE_TRIES
    clutter_objects: int = config.CLUTTER_OBJECTS
    clutter_runs: int = config.CLUTTER_RUNS
    clutter_cap: int = config.CLUTTER_INTERACTION_CAP


@dataclass(frozen=True)
class AblationSection:
    sizes: tuple = config.ABLATION_SIZES
    seeds: tuple = config.ABLATION_SEEDS


@dataclass(frozen=True)
class RunSection:
    seed: int = config.SEED
    workers: int = config.WORKERS


@dataclass(frozen=True)
class RunConfig:
    workspace: WorkspaceSection = field(default_factory=WorkspaceSection)
    gripper: GripperSection = field(default_factory=GripperSection)
    library: LibrarySection = field(default_factory=LibrarySection)
    collection: CollectionSection = field(default_factory=CollectionSection)
    patches: PatchesSection = field(default_factory=PatchesSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    stage: StageSection = field(default_factory=StageSection)
    baselines: BaselinesSection = field(default_factory=BaselinesSection)
    eval: EvalSection = field(default_factory=EvalSection)
    ablation: AblationSection = field(default_factory=AblationSection)
    run: RunSection = field(default_factory=RunSection)

    def with_run(self, seed=None, workers=None):
        """Apply --seed / --workers flags"""
        run = self.run
        if seed is not None:
            run = dataclasses.replace(run, seed=int(seed))
        if workers is not None:
            run = dataclasses.replace(run, workers=int(workers))
        return validate(dataclasses.replace(self, run=run))


SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(RunConfig)}


def _coerce(key, value, default):
    """Check a TOML value against the type of its default"""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(key, f"expected a list, got {value!r}")
        element = default[0] if default else 0.0
        return tuple(_coerce(f"{key}[{i}]", item, element) for i, item in enumerate(value))
    raise ConfigError(key, f"unsupported value {value!r}")


def _parse_env(key, text, default):
    """Parse an environment string according to the type of the default"""
    text = text.strip()
    if isinstance(default, bool):
        lowered = text.lower()
        if lowered in ('1', 'true', 'yes', 'on'):
            return True
        if lowered in ('0', 'false', 'no', 'off'):
            return False
        raise ConfigError(key, f"expected a boolean, got {text!r}")
    if isinstance(default, str):
        return text
    if isinstance(default, tuple):
        element = default[0] if default else 0.0
        items = [item for item in text.split(',') if item.strip()]
        return tuple(_parse_env(f"{key}[{i}]", item, element) for i, item in enumerate(items))
    try:
        return int(text) if isinstance(default, int) else float(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r}")


def _apply(section_name, section, values, parse):
    defaults = {f.name: getattr(section, f.name) for f in dataclasses.fields(section)}
    updates = {}
    for key, value in values.items():
        dotted = f"{section_name}.{key}"
        if key not in defaults:
            raise ConfigError(dotted, "unknown key")
        updates[key] = parse(dotted, value, defaults[key])
    return dataclasses.replace(section, **updates)


def env_overrides(environ):
    """{section: {key: text}} from GRASPFORGE_<SECTION>__<KEY> variables"""
    overrides = {}
    for name, text in environ.items():
        if not name.startswith(config.ENV_PREFIX) or '__' not in name:
            continue
        section, _, key = name[len(config.ENV_PREFIX):].partition('__')
        section, key = section.lower(), key.lower()
        if section not in SECTIONS:
            raise ConfigError(f"{section}.{key}", f"unknown section in {name}")
        overrides.setdefault(section, {})[key] = text
    return overrides


def load_run_config(path=None, environ=None):
    """
    Resolve a RunConfig: defaults, then the TOML file, then the environment

    Args:
        path: TOML file or None for defaults only
        environ: Mapping of environment variables (os.environ when None)

    Raises:
        ConfigError: unreadable file, unknown section or key, or a bad value
    """
    data = {}
    if path is not None:
        try:
            with open(path, 'rb') as handle:
                data = tomllib.load(handle)
        except OSError as e:
            raise ConfigError('config', f"cannot read {path}: {e}")
        except tomllib.TOMLDecodeError as e:
            raise ConfigError('config', f"invalid TOML in {path}: {e}")

    sections = {name: factory() for name, factory in SECTIONS.items()}
    for name, values in data.items():
        if name not in sections:
            raise ConfigError(name, "unknown section")
        if not isinstance(values, dict):
            raise ConfigError(name, "expected a table")
        sections[name] = _apply(name, sections[name], values, _coerce)

    for name, values in env_overrides(os.environ if environ is None else environ).items():
        sections[name] = _apply(name, sections[name], values, _parse_env)

    return validate(RunConfig(**sections))


def validate(run_config):
    """Range checks that need more than the value's type"""
    if run_config.model.architecture not in ARCHITECTURES:
        raise ConfigError('model.architecture', f"must be one of {sorted(ARCHITECTURES)}")
    if run_config.stage.law not in IMPORTANCE_LAWS:
        raise ConfigError('stage.law', f"must be one of {list(IMPORTANCE_LAWS)}")
    if run_config.stage.gamma < 1:
        raise ConfigError('stage.gamma', "must be >= 1")
    if not 0.0 <= run_config.stage.novel_fraction <= 1.0:
        raise ConfigError('stage.novel_fraction', "must be in [0, 1]")
    if run_config.run.workers < 1:
        raise ConfigError('run.workers', "must be >= 1")
    if run_config.collection.shards < 1:
        raise ConfigError('collection.shards', "must be >= 1")
    if run_config.train.batch_size < 1:
        raise ConfigError('train.batch_size', "must be >= 1")
    if not 0.0 <= run_config.train.momentum < 1.0:
        raise ConfigError('train.momentum', "must be in [0, 1)")
    if run_config.library.novel_fraction + run_config.library.test_fraction >= 1.0:
        raise ConfigError('library.test_fraction', "novel_fraction + test_fraction must be < 1")
    try:
        Workspace(run_config.workspace.width_mm, run_config.workspace.height_mm, run_config.workspace.px_per_mm)
    except ValueError as e:
        raise ConfigError('workspace', str(e))
    try:
        GripperSpec(run_config.gripper.max_open_mm, run_config.gripper.min_close_mm)
    except ValueError as e:
        raise ConfigError('gripper', str(e))
    return run_config


def dumps_run_config(run_config):
    """Resolved configuration as TOML text, sections in declaration order"""
    return tomli_w.dumps({section_field.name: dataclasses.asdict(getattr(run_config, section_field.name))
                          for section_field in dataclasses.fields(run_config)})


def write_run_config(path, run_config):
    text = dumps_run_config(run_config)
    with open(path, 'w') as handle:
        handle.write(text)
    return text
