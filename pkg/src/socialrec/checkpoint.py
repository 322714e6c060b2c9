"""Versioned checkpoint container.

A checkpoint is an uncompressed .npz archive (loadable without this package)
holding, under namespaced keys:

    meta/version        format version, currently 1
    meta/config         the full training config as a JSON string
    meta/dataset_hash   hash of the dataset the model was trained on
    param/<name>        every model parameter as a float64 array
    adam/t              optimizer step count
    adam/m/<name>       first-moment estimate per parameter
    adam/v/<name>       second-moment estimate per parameter
    clusters/*          mined cluster model arrays

Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .clusters import ClusterModel
from .config import TrainConfig
from .errors import DataError

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    version: int
    config: TrainConfig
    dataset_hash: str
    model_state: dict[str, np.ndarray]
    adam_state: dict[str, np.ndarray]
    clusters: ClusterModel


def save_checkpoint(
    path: str,
    model_state: dict[str, np.ndarray],
    adam_state: dict[str, np.ndarray],
    config: TrainConfig,
    clusters: ClusterModel,
    dataset_hash: str = "",
) -> None:
    payload: dict[str, np.ndarray] = {
        "meta/version": np.array([FORMAT_VERSION], dtype=np.int64),
        "meta/config": np.array(json.dumps(config.to_dict(), sort_keys=True)),
        "meta/dataset_hash": np.array(dataset_hash),
        "clusters/item_cluster": clusters.item_cluster,
        "clusters/user_cluster": clusters.user_cluster,
        "clusters/anchor_users": clusters.anchor_users,
        "clusters/anchor_jaccard": clusters.anchor_jaccard,
        "clusters/num_clusters": np.array([clusters.num_clusters], dtype=np.int64),
    }
    for name, arr in model_state.items():
        payload[f"param/{name}"] = np.asarray(arr)
    for name, arr in adam_state.items():
        payload[f"adam/{name}"] = np.asarray(arr)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as f:
        np.savez(f, **payload)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def load_checkpoint(path: str) -> Checkpoint:
    if not os.path.exists(path):
        raise DataError(f"checkpoint {path} does not exist")
    with np.load(path, allow_pickle=False) as z:
        keys = set(z.files)
        if "meta/version" not in keys:
            raise DataError(f"{path}: not a recognized checkpoint (missing version)")
        version = int(z["meta/version"][0])
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        config = TrainConfig.from_dict(json.loads(str(z["meta/config"])))
        dataset_hash = str(z["meta/dataset_hash"])
        model_state = {
            k[len("param/"):]: z[k] for k in keys if k.startswith("param/")
        }
        adam_state = {
            k[len("adam/"):]: z[k] for k in keys if k.startswith("adam/")
        }
        clusters = ClusterModel(
            item_cluster=z["clusters/item_cluster"],
            user_cluster=z["clusters/user_cluster"],
            anchor_users=z["clusters/anchor_users"],
            anchor_jaccard=z["clusters/anchor_jaccard"],
            num_clusters=int(z["clusters/num_clusters"][0]),
        )
    return Checkpoint(
        version=version,
        config=config,
        dataset_hash=dataset_hash,
        model_state=model_state,
        adam_state=adam_state,
        clusters=clusters,
    )
