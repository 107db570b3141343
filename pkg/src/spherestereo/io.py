"""File formats: PNG images, PFM float maps and binary PLY point clouds."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import MalformedPly


def read_image(path) -> np.ndarray:
    """Load an image as float32; RGB is kept as (h, w, 3)."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if "A" in im.mode or im.mode == "P" else "L")
        return np.asarray(im, dtype=np.float32)


def write_image(path, image) -> None:
    arr = np.clip(np.rint(np.asarray(image, dtype=np.float64)), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, optimize=False)


def write_mask(path, mask) -> None:
    Image.fromarray(np.asarray(mask, dtype=np.uint8) * 255).save(path)


def read_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 127


def write_pfm(path, data) -> None:
    """Single-channel little-endian PFM, rows stored bottom-to-top as the format requires."""
    data = np.asarray(data, dtype="<f4")
    if data.ndim != 2:
        raise ValueError("only single-channel PFM is supported")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise ValueError(f"{path}: not a PFM file")
        channels = 3 if header == b"PF" else 1
        dims = fh.readline()
        while dims.startswith(b"#"):
            dims = fh.readline()
        w, h = (int(v) for v in dims.split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dtype, count=w * h * channels)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].astype(np.float32)


def disparity_preview(disp, path) -> None:
    """8-bit visualisation, invalid pixels black."""
    d = np.asarray(disp, dtype=np.float64)
    valid = np.isfinite(d)
    out = np.zeros(d.shape, dtype=np.uint8)
    if valid.any():
        lo, hi = d[valid].min(), d[valid].max()
        span = hi - lo if hi > lo else 1.0
        out[valid] = (1 + 254 * (d[valid] - lo) / span).astype(np.uint8)
    Image.fromarray(out).save(path)


# -- PLY ----------------------------------------------------------------------

_PLY_TYPES = {"float": "<f4", "float32": "<f4", "uchar": "u1", "uint8": "u1", "double": "<f8",
              "int": "<i4", "uint": "<u4", "short": "<i2", "ushort": "<u2", "char": "i1"}


def write_ply(cloud, path) -> None:
    """Binary little-endian PLY with float32 x/y/z and optional uchar r/g/b."""
    pts = np.asarray(cloud.points, dtype="<f4").reshape(-1, 3)
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    has_color = cloud.colors is not None
    if has_color:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    rec = np.empty(len(pts), dtype=fields)
    rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
    if has_color:
        col = np.asarray(cloud.colors, dtype=np.uint8).reshape(-1, 3)
        rec["red"], rec["green"], rec["blue"] = col[:, 0], col[:, 1], col[:, 2]
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(pts)}",
              "property float x", "property float y", "property float z"]
    if has_color:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(rec.tobytes())


def read_ply(path):
    from .triangulate import PointCloud

    with open(path, "rb") as fh:
        if fh.readline().strip() != b"ply":
            raise MalformedPly(f"{path}: missing 'ply' magic")
        fmt = None
        count = None
        current = None
        props = []
        while True:
            line = fh.readline()
            if not line:
                raise MalformedPly(f"{path}: header not terminated")
            tok = line.decode("ascii", "replace").split()
            if not tok or tok[0] in ("comment", "obj_info"):
                continue
            if tok[0] == "end_header":
                break
            if tok[0] == "format":
                fmt = tok[1]
            elif tok[0] == "element":
                if tok[1] != "vertex" and count is None:
                    raise MalformedPly(f"{path}: unsupported leading element {tok[1]}")
                current = tok[1]
                if current == "vertex":
                    count = int(tok[2])
            elif tok[0] == "property" and current == "vertex":
                if len(tok) != 3:
                    raise MalformedPly(f"{path}: list properties on vertices are not supported")
                if tok[1] not in _PLY_TYPES:
                    raise MalformedPly(f"{path}: unsupported property type {tok[1]}")
                props.append((tok[2], _PLY_TYPES[tok[1]]))
        if fmt != "binary_little_endian" or count is None:
            raise MalformedPly(f"{path}: expected binary_little_endian vertex data")
        dtype = np.dtype(props)
        payload = fh.read(dtype.itemsize * count)
    if len(payload) != dtype.itemsize * count:
        raise MalformedPly(f"{path}: truncated vertex data")
    rec = np.frombuffer(payload, dtype=dtype, count=count)
    names = dtype.names or ()
    if not {"x", "y", "z"} <= set(names):
        raise MalformedPly(f"{path}: vertices lack x/y/z")
    pts = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float32)
    colors = None
    if {"red", "green", "blue"} <= set(names):
        colors = np.stack([rec["red"], rec["green"], rec["blue"]], axis=1).astype(np.uint8)
    return PointCloud(pts, colors)

