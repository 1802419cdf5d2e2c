from datetime import datetime

import pytz
from sqlalchemy import select
from sqlalchemy.orm import Session

import db
from models import Command, RunRecord
from util.logging import logger


def latest_run(config_digest: str) -> RunRecord | None:
    engine = db.get_engine()
    if engine is None:
        return None
    with Session(engine) as s:
        stmt = (
            select(RunRecord)
            .where(RunRecord.config_digest == config_digest)
            .order_by(RunRecord.id.desc())
            .limit(1)
        )
        return s.execute(stmt).scalar_one_or_none()


def record_run(
    command: Command,
    config_digest: str,
    report_digest: str,
    exit_code: int,
    schema_version: int,
) -> RunRecord | None:
    """Store one CLI run; warns when the same config produced a different report."""
    engine = db.get_engine()
    if engine is None:
        logger.debug("DATA_DIR not set, run history disabled")
        return None

    previous = latest_run(config_digest)
    if previous and previous.report_digest != report_digest:
        logger.warning(
            f"Report for {command.value} differs from run #{previous.id} with the same config "
            f"({previous.report_digest[:12]} != {report_digest[:12]})"
        )

    with Session(engine) as s:
        record = RunRecord(
            command=command,
            config_digest=config_digest,
            report_digest=report_digest,
            exit_code=exit_code,
            schema_version=schema_version,
            created_at=datetime.now(pytz.utc),
        )
        s.add(record)
        s.commit()
        s.refresh(record)
        s.expunge(record)
    logger.debug(f"Recorded {record}")
    return record
