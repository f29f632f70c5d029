"""
Dataset persistence
    <name>.csv          scene_id,x_mm,y_mm,theta_deg,label,stage,patch_path[,weight]
    <name>.scenes.txt   scene snapshots referenced by the records
    <name>.json         provenance
Patches live under the same directory, referenced by relative path.
"""

import csv
import json
import logging
from pathlib import Path

from collector.trial_collector import Dataset, TrialRecord
from patches.patch_store import PatchStore
from simulator.models import GraspConfig
from simulator.scene_io import read_scene_file, write_scene_file

logger = logging.getLogger(__name__)

DATASET_COLUMNS = ['scene_id', 'x_mm', 'y_mm', 'theta_deg', 'label', 'stage', 'patch_path']


def write_dataset_csv(path, records, weights=None):
    """Write records, with a trailing weight column when weights are given"""
    header = DATASET_COLUMNS + (['weight'] if weights is not None else [])
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for index, record in enumerate(records):
            row = [record.scene_id, repr(float(record.grasp.x_mm)), repr(float(record.grasp.y_mm)),
                   repr(float(record.grasp.theta_deg)), int(record.label), record.stage, record.patch_path]
            if weights is not None:
                row.append(int(weights[index]))
            writer.writerow(row)


def read_dataset_csv(path):
    """
    Returns:
        List of (TrialRecord, weight); weight is 1 when the file has no weight column
    """
    entries = []
    with open(path, newline='') as handle:
        reader = csv.DictReader(handle)
        missing = set(DATASET_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            grasp = GraspConfig(float(row['x_mm']), float(row['y_mm']), float(row['theta_deg']))
            record = TrialRecord(scene_id=row['scene_id'], grasp=grasp, label=row['label'] == '1',
                                 stage=int(row['stage']), patch_path=row['patch_path'])
            entries.append((record, int(row.get('weight') or 1)))
    return entries


def save_dataset(dataset, directory, name='dataset', weights=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(directory / f"{name}.csv", dataset.records, weights)
    referenced = {}
    for record in dataset.records:
        if record.scene_id in dataset.scenes and record.scene_id not in referenced:
            referenced[record.scene_id] = dataset.scenes[record.scene_id]
    write_scene_file(directory / f"{name}.scenes.txt", referenced)
    (directory / f"{name}.json").write_text(json.dumps(dataset.provenance, indent=2, sort_keys=True) + '\n')
    logger.info(f"Saved {len(dataset)} records to {directory / name}.csv")


def load_dataset(directory, name='dataset', store=None):
    """Reload a dataset saved by save_dataset; patches are read lazily from `directory`"""
    directory = Path(directory)
    entries = read_dataset_csv(directory / f"{name}.csv")
    scenes_path = directory / f"{name}.scenes.txt"
    scenes = read_scene_file(scenes_path) if scenes_path.exists() else {}
    provenance_path = directory / f"{name}.json"
    provenance = json.loads(provenance_path.read_text()) if provenance_path.exists() else {}
    dataset = Dataset([record for record, _ in entries], provenance, scenes,
                      store if store is not None else PatchStore(directory))
    return dataset, [weight for _, weight in entries]
