"""
Database manager for the run ledger
"""

import logging
from contextlib import contextmanager
from pathlib import Path

from sqlalchemy import case, create_engine, func
from sqlalchemy.orm import scoped_session, sessionmaker

import config
from patches.patch_pipeline import bin_angle
from storage.models import Base, Run, StageReportLog, TrialLog

logger = logging.getLogger(__name__)

SOURCE_NAMES = {'random': 'Random Trials', 'staged': 'Multi-Staged', 'test': 'Test Set'}


def default_database_url(run_dir):
    return config.DATABASE_URL or f"sqlite:///{Path(run_dir).resolve() / 'run.db'}"


class DatabaseManager:
    """Manages ledger connections and operations"""

    def __init__(self, database_url):
        self.database_url = database_url
        self.engine = create_engine(self.database_url)
        self.session_factory = sessionmaker(bind=self.engine)
        self.Session = scoped_session(self.session_factory)

    def create_tables(self):
        """Create all ledger tables"""
        Base.metadata.create_all(self.engine)
        logger.info("Ledger tables created")

    @contextmanager
    def session_scope(self):
        """Provide a transactional scope for ledger operations"""
        session = self.Session()
        try:
            yield session
            session.commit()
        except Exception as e:
            session.rollback()
            logger.error(f"Ledger error: {e}")
            raise
        finally:
            session.close()

    def start_run(self, command, seed, config_text):
        """Record a CLI invocation; returns the run id"""
        with self.session_scope() as session:
            run = Run(command=command, seed=int(seed), config_text=config_text)
            session.add(run)
            session.flush()
            return run.id

    def log_trials(self, run_id, records, source):
        """Append executed TrialRecords under a source tag (random, staged, test)"""
        with self.session_scope() as session:
            session.add_all([
                TrialLog(run_id=run_id, source=source, scene_id=r.scene_id, x_mm=float(r.grasp.x_mm),
                         y_mm=float(r.grasp.y_mm), theta_deg=float(r.grasp.theta_deg),
                         angle_bin=bin_angle(r.grasp.theta_deg).index, label=bool(r.label), stage=r.stage,
                         failure_reason=r.failure_reason, prior_score=r.prior_score, patch_path=r.patch_path)
                for r in records
            ])
        logger.info(f"Logged {len(records)} {source} trials for run {run_id}")

    def log_stage_report(self, run_id, report):
        with self.session_scope() as session:
            session.add(StageReportLog(run_id=run_id, stage=report.stage, trials=report.trials,
                                       positives=report.positives, grasp_rate=report.grasp_rate,
                                       benchmark_accuracy=report.benchmark_accuracy))

    def get_dataset_stats(self):
        """Dataset statistics rows per source, computed with SQL aggregates"""
        with self.session_scope() as session:
            positives = func.sum(case((TrialLog.label.is_(True), 1), else_=0))
            rows = session.query(TrialLog.source, positives, func.count(TrialLog.id)).group_by(TrialLog.source).all()
            stats = {source: (int(pos or 0), int(total)) for source, pos, total in rows}

        table = []
        for source in ('random', 'staged', 'test'):
            if source in stats:
                pos, total = stats[source]
                table.append({'name': SOURCE_NAMES[source], 'positives': pos, 'negatives': total - pos,
                              'total': total, 'grasp_rate': pos / total if total else None})
        return table

    def get_stage_reports(self):
        with self.session_scope() as session:
            reports = session.query(StageReportLog).order_by(StageReportLog.run_id, StageReportLog.stage).all()
            return [{
                'stage': r.stage,
                'trials': r.trials,
                'positives': r.positives,
                'grasp_rate': r.grasp_rate,
                'benchmark_accuracy': r.benchmark_accuracy,
            } for r in reports]
