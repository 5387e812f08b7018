from functools import lru_cache

from app.adapters.checkpoint_store import CheckpointStore, FileCheckpointStore
from app.adapters.run_pool import RunPool
from app.services.experiment_service import ExperimentService, ExperimentServiceProtocol


@lru_cache
def get_checkpoint_store() -> CheckpointStore:
    return FileCheckpointStore()


@lru_cache
def get_run_pool() -> RunPool:
    return RunPool()


def get_experiment_service() -> ExperimentServiceProtocol:
    return ExperimentService(
        checkpoint_store=get_checkpoint_store(),
        run_pool=get_run_pool(),
    )
