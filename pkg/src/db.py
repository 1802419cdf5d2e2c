import os
from pathlib import Path

from sqlalchemy import Engine, create_engine
from sqlalchemy.pool import StaticPool

from models import Base

engine: Engine | None = None


def get_engine() -> Engine | None:
    """Engine for the run history, or None when DATA_DIR is unset.

    Created on first use so plain CLI runs never touch the filesystem.
    """
    global engine
    if engine is not None:
        return engine

    data_url = os.getenv("DATA_DIR")
    if not data_url:
        return None

    if data_url == ":memory:":
        engine = create_engine(
            "sqlite:///:memory:",
            connect_args={"check_same_thread": False},
            poolclass=StaticPool,
        )
    else:
        data_dir = Path(data_url)
        if not data_dir.exists():
            data_dir.mkdir(parents=True, exist_ok=True)
        engine = create_engine(f"sqlite:///{data_url}/lab.db")

    Base.metadata.create_all(engine)
    return engine
