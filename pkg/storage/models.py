"""Run ledger models: one Run per CLI invocation, its executed trials and stage reports"""

from datetime import datetime

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class Run(Base):
    """One CLI invocation"""
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True)
    command = Column(String(50), nullable=False)
    seed = Column(Integer, nullable=False)
    config_text = Column(Text, nullable=False)
    created_at = Column(DateTime, default=datetime.now)

    trials = relationship('TrialLog', back_populates='run', cascade='all, delete-orphan')
    stage_reports = relationship('StageReportLog', back_populates='run', cascade='all, delete-orphan')

    def __repr__(self):
        return f"<Run(id={self.id}, command='{self.command}', seed={self.seed})>"


class TrialLog(Base):
    """One executed grasp"""
    __tablename__ = 'trial_logs'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id'), nullable=False)
    source = Column(String(20), nullable=False)  # random, staged, test
    scene_id = Column(String(50), nullable=False)
    x_mm = Column(Float, nullable=False)
    y_mm = Column(Float, nullable=False)
    theta_deg = Column(Float, nullable=False)
    angle_bin = Column(Integer, nullable=False)
    label = Column(Boolean, nullable=False)
    stage = Column(Integer, default=0)
    failure_reason = Column(String(30))
    prior_score = Column(Float)
    patch_path = Column(String(200))

    run = relationship('Run', back_populates='trials')

    def __repr__(self):
        return f"<TrialLog(scene='{self.scene_id}', theta={self.theta_deg:.1f}, label={self.label})>"


class StageReportLog(Base):
    """Summary of one staged-learning round"""
    __tablename__ = 'stage_reports'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('runs.id'), nullable=False)
    stage = Column(Integer, nullable=False)
    trials = Column(Integer, nullable=False)
    positives = Column(Integer, nullable=False)
    grasp_rate = Column(Float)
    benchmark_accuracy = Column(Float)

    run = relationship('Run', back_populates='stage_reports')

    def __repr__(self):
        return f"<StageReportLog(stage={self.stage}, rate={self.grasp_rate})>"
