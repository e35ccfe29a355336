"""Road network generation, aerial parsing and evaluation."""

from ._core import (
    DataError,
    Model,
    Raster,
    RoadGraph,
    apls,
    diversity,
    generate,
    iou_f1,
    load_checkpoint,
    load_graph,
    load_raster,
    parse_osm,
    parse_raster,
    raster_from_array,
    render_likelihood,
    replay,
    run_cli,
    save_graph,
    save_raster,
    sketch_seed,
    skeleton_graph,
    template_graph,
    templates,
    train,
    urban_frechet,
)

__all__ = [
    "DataError",
    "Model",
    "Raster",
    "RoadGraph",
    "apls",
    "diversity",
    "generate",
    "iou_f1",
    "load_checkpoint",
    "load_graph",
    "load_raster",
    "parse_osm",
    "parse_raster",
    "raster_from_array",
    "render_likelihood",
    "replay",
    "run_cli",
    "save_graph",
    "save_raster",
    "sketch_seed",
    "skeleton_graph",
    "template_graph",
    "templates",
    "train",
    "urban_frechet",
]
