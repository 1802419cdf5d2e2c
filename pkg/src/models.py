from datetime import datetime
from enum import Enum

from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column


class Base(DeclarativeBase):
    pass


class Command(Enum):
    VERIFY_THM1 = "verify-thm1"
    BIAS_PROBE = "bias-probe"
    FIT_CRITIC = "fit-critic"
    GRAD_CHECK = "grad-check"
    SAMPLE_GRAD = "sample-grad"
    GEN_MDP = "gen-mdp"


class RunRecord(Base):
    __tablename__ = "run_record"

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True)
    command: Mapped[Command] = mapped_column(nullable=False)
    config_digest: Mapped[str] = mapped_column(nullable=False, index=True)
    report_digest: Mapped[str] = mapped_column(nullable=False)
    exit_code: Mapped[int] = mapped_column(nullable=False)
    schema_version: Mapped[int] = mapped_column(nullable=False)
    created_at: Mapped[datetime] = mapped_column(nullable=False)

    def __repr__(self):
        return (
            f"RunRecord(command={self.command.value}, exit_code={self.exit_code}, "
            f"config={self.config_digest[:12]}, report={self.report_digest[:12]})"
        )
