"""Renderer-free debug views: SVG overlays of annotated views and PLY point clouds."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import trimesh  # noqa: E402

from .annotation import BOX_EDGES, ViewAnnotation  # noqa: E402
from .camera_geometry import project_points  # noqa: E402

PALETTE = ("tab:red", "tab:blue", "tab:green", "tab:orange", "tab:purple", "tab:brown")


def render_view_svg(annotation: ViewAnnotation, path: str | Path, title: str = "") -> Path:
    """Visible points, box wireframes and axis segments projected into the image plane."""
    intr = annotation.intrinsics
    fig, ax = plt.subplots(figsize=(6, 6 * intr.height / intr.width))
    try:
        if len(annotation.visible_cloud):
            uv = project_points(intr, annotation.pose, annotation.visible_cloud).uv
            ax.scatter(uv[:, 0], uv[:, 1], s=0.5, c="0.6", linewidths=0)
        for index, triad in enumerate(annotation.triads):
            color = PALETTE[index % len(PALETTE)]
            box = project_points(intr, annotation.pose, annotation.boxes[triad.link].vertices).uv
            for a, b in BOX_EDGES:
                ax.plot(box[[a, b], 0], box[[a, b], 1], color=color, linewidth=1.0)
            axis = annotation.axes[triad.link]
            ends = project_points(intr, annotation.pose, np.vstack([axis.p0, axis.p1])).uv
            ax.plot(ends[:, 0], ends[:, 1], color=color, linewidth=2.0, linestyle="--")
            ax.annotate(
                f"{triad.label.link_name} ({triad.label.joint_kind})",
                ends[1],
                color=color,
                fontsize=7,
            )
        ax.set_xlim(0, intr.width)
        ax.set_ylim(intr.height, 0)
        ax.set_aspect("equal")
        ax.set_title(title, fontsize=8)
        path = Path(path)
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)
    return path


def write_point_cloud_ply(annotation: ViewAnnotation, path: str | Path) -> Path:
    """Visible scene points; points of annotated links take their overlay color."""
    points = np.asarray(annotation.visible_cloud, dtype=float).reshape(-1, 3)
    colors = np.tile(np.array([160, 160, 160, 255], dtype=np.uint8), (len(points), 1))
    for index, triad in enumerate(annotation.triads):
        rgba = np.array(matplotlib.colors.to_rgba(PALETTE[index % len(PALETTE)])) * 255
        colors[annotation.visible_links == triad.link] = rgba.astype(np.uint8)
    path = Path(path)
    trimesh.PointCloud(points, colors=colors).export(path, file_type="ply")
    return path
