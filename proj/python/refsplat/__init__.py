try:
    from . import _refsplat as _core  # installed wheel layout
except ImportError:
    import _refsplat as _core  # build-tree layout

Camera = _core.Camera
GaussianCloud = _core.GaussianCloud
export_ply = _core.export_ply
generate_synthetic_dataset = _core.generate_synthetic_dataset
import_ply = _core.import_ply
init_from_points = _core.init_from_points
load_cameras = _core.load_cameras
photometric_loss = _core.photometric_loss
psnr = _core.psnr
render = _core.render
render_relit = _core.render_relit
ssim = _core.ssim
train_scene = _core.train_scene

__all__ = [
    "Camera",
    "GaussianCloud",
    "export_ply",
    "generate_synthetic_dataset",
    "import_ply",
    "init_from_points",
    "load_cameras",
    "photometric_loss",
    "psnr",
    "render",
    "render_relit",
    "ssim",
    "train_scene",
]
