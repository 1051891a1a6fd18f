"""Doppler-driven temporal aggregation of radar point clouds."""

from .aggregator import (
    AggregatedCloud,
    AggregatedPoint,
    AggregationConfig,
    FrameBuffer,
    FrameRecord,
    aggregate,
    doppdrive_aggregate,
    duration_limit,
    fixed_radial_aggregate,
    no_aggregate,
    push_frame,
    radial_shift,
    sliding_aggregate,
    standard_aggregate,
)
from .doppler import (
    DecomposedPoint,
    EgoState,
    EgoVelocity,
    RadarPoint,
    decompose,
    ego_speed_doppler,
    estimate_ego_velocity,
)
from .errors import (
    DegeneratePoint,
    DoppDriveError,
    EmptyHistogram,
    FormatError,
    InsufficientPoints,
    InvalidResolution,
    InvalidScenario,
    MissingGroundTruth,
    NoConsensus,
    NonMonotonicTimestamps,
    UnknownPoint,
    WindowMismatch,
)
from .evaluation import (
    DetectorParams,
    average_precision,
    bev_iou,
    cluster_detect,
    dispersion,
    elimination_stats,
)
from .geometry import Pose2, Vec3, accumulate_pose, azimuth_of, radial_frame_at, transform_to_current
from .heading import GThetaTable, HeadingDistribution, build_table, fit_empirical, g_theta
from .simulator import Box, EgoSegment, GroundTruth, NoiseSpec, ObjectSpec, ScenarioSpec, sparsify, synthesize

__version__ = "0.1.0"

__all__ = [
    "AggregatedCloud",
    "AggregatedPoint",
    "AggregationConfig",
    "Box",
    "DecomposedPoint",
    "DegeneratePoint",
    "DetectorParams",
    "DoppDriveError",
    "EgoSegment",
    "EgoState",
    "EgoVelocity",
    "EmptyHistogram",
    "FormatError",
    "FrameBuffer",
    "FrameRecord",
    "GThetaTable",
    "GroundTruth",
    "HeadingDistribution",
    "InsufficientPoints",
    "InvalidResolution",
    "InvalidScenario",
    "MissingGroundTruth",
    "NoConsensus",
    "NoiseSpec",
    "NonMonotonicTimestamps",
    "ObjectSpec",
    "Pose2",
    "RadarPoint",
    "ScenarioSpec",
    "UnknownPoint",
    "Vec3",
    "WindowMismatch",
    "accumulate_pose",
    "aggregate",
    "average_precision",
    "azimuth_of",
    "bev_iou",
    "build_table",
    "cluster_detect",
    "decompose",
    "dispersion",
    "doppdrive_aggregate",
    "duration_limit",
    "ego_speed_doppler",
    "elimination_stats",
    "estimate_ego_velocity",
    "fit_empirical",
    "fixed_radial_aggregate",
    "g_theta",
    "no_aggregate",
    "push_frame",
    "radial_frame_at",
    "radial_shift",
    "sliding_aggregate",
    "sparsify",
    "standard_aggregate",
    "synthesize",
    "transform_to_current",
]
