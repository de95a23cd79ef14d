"""Pascal-VOC polyp annotations in, YOLO label files out."""
from __future__ import annotations

import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .errors import InvalidBox, MissingField, UnknownClass, XmlParseError
from .raster import PixelBox


@dataclass(frozen=True)
class PolypAnnotation:
    class_id: int
    box: PixelBox
    width: int
    height: int

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError("class_id must be >= 0")


def _field(node, tag, where):
    child = node.find(tag)
    if child is None or child.text is None or not child.text.strip():
        raise MissingField(f"missing <{tag}> in {where}")
    return child.text.strip()


def _number(text, tag):
    try:
        return int(round(float(text)))
    except ValueError:
        raise MissingField(f"<{tag}> is not a number: {text!r}") from None


def parse_voc(xml_text, one_based=False, class_names=None) -> list:
    """One PolypAnnotation per ``<object>`` in a VOC document.

    Coordinates are read as 0-based with exclusive max. With ``one_based``
    they are read as VOC's 1-based inclusive convention, so only the minima
    shift down by one. Without ``class_names`` every object is class 0.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise XmlParseError(str(exc)) from exc
    size = root.find("size")
    if size is None:
        raise MissingField("missing <size>")
    width = _number(_field(size, "width", "<size>"), "width")
    height = _number(_field(size, "height", "<size>"), "height")
    if width < 1 or height < 1:
        raise MissingField(f"image size {width}x{height} is not usable")

    out = []
    for obj in root.findall("object"):
        bnd = obj.find("bndbox")
        if bnd is None:
            raise MissingField("missing <bndbox> in <object>")
        x0, y0, x1, y1 = (_number(_field(bnd, t, "<bndbox>"), t)
                          for t in ("xmin", "ymin", "xmax", "ymax"))
        if one_based:
            x0 -= 1
            y0 -= 1
        if x0 >= x1 or y0 >= y1:
            raise InvalidBox(f"degenerate box ({x0}, {y0}, {x1}, {y1})")
        class_id = 0
        if class_names is not None:
            name_node = obj.find("name")
            name = name_node.text.strip() if name_node is not None and name_node.text else ""
            if name not in class_names:
                raise UnknownClass(f"class {name!r} not in class list")
            class_id = class_names.index(name)
        out.append(PolypAnnotation(class_id, PixelBox(x0, y0, x1, y1), width, height))
    return out


def parse_voc_file(path, one_based=False, class_names=None) -> list:
    with open(path, "rb") as f:
        data = f.read()
    try:
        return parse_voc(data, one_based, class_names)
    except (XmlParseError, MissingField, InvalidBox, UnknownClass) as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def read_class_list(path) -> list:
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def to_yolo(ann: PolypAnnotation) -> str:
    b, W, H = ann.box, ann.width, ann.height
    cx = (b.x_min + b.x_max) / 2 / W
    cy = (b.y_min + b.y_max) / 2 / H
    return f"{ann.class_id} {cx:.6f} {cy:.6f} {b.width / W:.6f} {b.height / H:.6f}"


def from_yolo(line, width, height) -> PolypAnnotation:
    """Inverse of to_yolo, rounding edges to the nearest pixel."""
    cls, cx, cy, w, h = line.split()
    cx, w = float(cx) * width, float(w) * width
    cy, h = float(cy) * height, float(h) * height
    box = PixelBox(round(cx - w / 2), round(cy - h / 2), round(cx + w / 2), round(cy + h / 2))
    return PolypAnnotation(int(cls), box, width, height)


def yolo_text(annotations) -> str:
    return "".join(to_yolo(a) + "\n" for a in annotations)


def write_labels(annotations, path) -> None:
    with open(os.fspath(path), "w", encoding="utf-8", newline="\n") as f:
        f.write(yolo_text(annotations))
