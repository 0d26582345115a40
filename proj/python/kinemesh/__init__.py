"""Part-aware mesh reconstruction and articulation recovery from two states."""

from ._core import (
    CameraView,
    Dataset,
    Error,
    EvalReport,
    FitResult,
    GroundTruth,
    JointParams,
    PartAwareMesh,
    PartJoint,
    TrainConfig,
    analytic_inverse,
    articulate,
    axis_angle_error,
    chamfer_mm,
    closest_point_on_triangle,
    evaluate,
    export_urdf,
    fit,
    generate_dataset,
    load_dataset,
    mesh_from_depth,
    parse_urdf,
    point_set_chamfer,
    psnr,
    render,
    sample_surface,
    ssim,
    transport_vertices,
)

__all__ = [name for name in dir() if not name.startswith("_")]
