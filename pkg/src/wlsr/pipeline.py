"""Dataset-level orchestration: build a bank, augment a corpus, validate output.

Output layout of ``augment``::

    out/images/<stem>.png     augmented frames (passed-through frames keep
                              their original file name and bytes)
    out/labels/<stem>.txt     YOLO labels
    out/manifest.json         per-image records and counts

Randomness: one PCG64 stream per image derived from ``(seed, stem)`` and one
for the selection shuffle, so results do not depend on worker count.
"""
from __future__ import annotations

import json
import logging
import math
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from . import annot, lightbank, placement, prohibit
from .errors import ManifestMissing, MissingBank, UnpairedFiles
from .lightbank import ThresholdParams
from .placement import Augmented
from .prohibit import ProhibitionParams
from .raster import load_image, save_image

log = logging.getLogger(__name__)

RUN_SCHEMA = "wlsr-run/1"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
SELECTION_KEY = "__selection__"

AUGMENTED = "augmented"
PASSED = "passed-through"
SKIPPED = "skipped-no-fit"
DROPPED = "dropped-no-annotation"
STATUSES = (AUGMENTED, PASSED, SKIPPED, DROPPED)


@dataclass
class PipelineConfig:
    images_dir: str
    voc_dir: str
    bank_dir: str
    out_dir: str
    fraction: float = 0.2
    seed: int = 0
    max_retries: int = placement.DEFAULT_MAX_RETRIES
    params: ProhibitionParams = field(default_factory=ProhibitionParams)
    debug_dir: str | None = None
    voc_one_based: bool = False
    class_names: list | None = None
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def list_images(images_dir) -> dict:
    """Map basename stem -> file name for every PNG/JPEG in a directory."""
    out = {}
    for name in sorted(os.listdir(images_dir)):
        stem, ext = os.path.splitext(name)
        if ext.lower() not in IMAGE_SUFFIXES:
            continue
        if stem in out:
            raise ValueError(f"two images share the stem {stem!r}: {out[stem]}, {name}")
        out[stem] = name
    return out


def list_annotations(voc_dir) -> dict:
    return {os.path.splitext(n)[0]: n for n in sorted(os.listdir(voc_dir))
            if n.lower().endswith(".xml")}


def selection_count(fraction, n) -> int:
    # decimal avoids floor(0.29 * 100) == 28
    return math.floor(Decimal(str(fraction)) * n)


def select_for_augmentation(stems, fraction, seed) -> list:
    """Seeded shuffle of the sorted stems; the first floor(fraction * N) win."""
    stems = sorted(stems)
    k = selection_count(fraction, len(stems))
    perm = placement.image_rng(seed, SELECTION_KEY).permutation(len(stems))
    return sorted(stems[i] for i in perm[:k])


# -- build-bank --------------------------------------------------------------

def cmd_build_bank(images_dir, out_dir, crops=300, seed=0,
                   params: ThresholdParams = ThresholdParams(),
                   nms_iou=lightbank.DEFAULT_NMS_IOU) -> str:
    """Build and persist a bank from every image in ``images_dir``."""
    files = list_images(images_dir)
    ids = list(files)
    corpus = (load_image(os.path.join(images_dir, files[s])) for s in ids)
    bank = lightbank.build_bank(list(corpus), params, crops, seed, nms_iou, source_ids=ids)
    if os.path.isdir(os.path.join(out_dir, "patches")):
        shutil.rmtree(os.path.join(out_dir, "patches"))
    path = lightbank.save_bank(bank, out_dir)
    log.info("wrote %d patches to %s", len(bank), out_dir)
    return path


# -- augment -----------------------------------------------------------------

_BANK = None


def _init_worker(bank_dir):
    global _BANK
    _BANK = lightbank.load_bank(bank_dir)


def _process(task):
    """Handle one annotated image; runs in a worker or in-process."""
    stem, filename, anns, selected, cfg = task
    img_path = os.path.join(cfg["images_dir"], filename)
    out_images = os.path.join(cfg["out_dir"], "images")
    out_labels = os.path.join(cfg["out_dir"], "labels")
    record = {"image": filename, "stem": stem, "selected": selected,
              "placement": None, "tries": []}
    if not selected:
        shutil.copyfile(img_path, os.path.join(out_images, filename))
        annot.write_labels(anns, os.path.join(out_labels, stem + ".txt"))
        record["status"] = PASSED
        return record

    image = load_image(img_path)
    params = cfg["params"]
    prohib = prohibit.build_prohibition(image, anns, params)
    rng = placement.image_rng(cfg["seed"], stem)
    outcome = placement.augment_image(image, anns, _BANK, params, rng, cfg["max_retries"],
                                      image_id=stem, prohibition=prohib)
    record["tries"] = list(outcome.tries)
    if isinstance(outcome, Augmented):
        save_image(outcome.image, os.path.join(out_images, stem + ".png"))
        annot.write_labels(anns, os.path.join(out_labels, stem + ".txt"))
        record["status"] = AUGMENTED
        record["placement"] = outcome.placement.to_json()
        record["output"] = stem + ".png"
    else:
        record["status"] = SKIPPED
    if cfg["debug_dir"]:
        save_image(prohibit.render_debug(image, prohib),
                   os.path.join(cfg["debug_dir"], stem + ".prohibit.png"))
        if isinstance(outcome, Augmented):
            patch = _BANK[outcome.placement.patch_id]
            save_image(placement.render_placement_debug(outcome.image, outcome.placement, patch),
                       os.path.join(cfg["debug_dir"], stem + ".placement.png"))
    return record


def _prepare_out_dir(out_dir):
    # only clear what a previous run of ours wrote
    if os.path.exists(os.path.join(out_dir, "manifest.json")):
        for sub in ("images", "labels"):
            shutil.rmtree(os.path.join(out_dir, sub), ignore_errors=True)
        os.remove(os.path.join(out_dir, "manifest.json"))
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "labels"), exist_ok=True)


def config_snapshot(config: PipelineConfig, bank_dir) -> dict:
    return {
        "images_dir": os.path.abspath(config.images_dir),
        "voc_dir": os.path.abspath(config.voc_dir),
        "bank_dir": os.path.abspath(bank_dir),
        "fraction": config.fraction,
        "seed": config.seed,
        "max_retries": config.max_retries,
        "prohibition": config.params.to_json(),
        "voc_one_based": config.voc_one_based,
        "class_names": config.class_names,
        "debug": config.debug_dir is not None,
    }


def cmd_augment(config: PipelineConfig) -> dict:
    """Augment a VOC-annotated corpus; returns the run manifest (also written)."""
    if not os.path.isfile(os.path.join(config.bank_dir, "manifest.json")):
        raise MissingBank(f"no bank manifest under {config.bank_dir}")
    images = list_images(config.images_dir)
    xmls = list_annotations(config.voc_dir)
    unpaired_images = [images[s] for s in images if s not in xmls]
    unpaired_xml = [xmls[s] for s in xmls if s not in images]
    paired = [s for s in images if s in xmls]
    if not paired:
        raise UnpairedFiles(f"no image in {config.images_dir} has an XML in {config.voc_dir}")

    records = {}
    anns_by_stem = {}
    for stem in images:
        if stem not in xmls:
            records[stem] = {"image": images[stem], "stem": stem, "status": DROPPED,
                             "selected": False, "placement": None, "tries": [],
                             "reason": "no-xml"}
            continue
        anns = annot.parse_voc_file(os.path.join(config.voc_dir, xmls[stem]),
                                    config.voc_one_based, config.class_names)
        if not anns:
            records[stem] = {"image": images[stem], "stem": stem, "status": DROPPED,
                             "selected": False, "placement": None, "tries": [],
                             "reason": "no-objects"}
            continue
        anns_by_stem[stem] = anns

    kept = sorted(anns_by_stem)
    selected = set(select_for_augmentation(kept, config.fraction, config.seed))

    _prepare_out_dir(config.out_dir)
    if config.debug_dir:
        os.makedirs(config.debug_dir, exist_ok=True)
    cfg = {"images_dir": config.images_dir, "out_dir": config.out_dir,
           "seed": config.seed, "max_retries": config.max_retries,
           "params": config.params, "debug_dir": config.debug_dir}
    tasks = [(s, images[s], anns_by_stem[s], s in selected, cfg) for s in kept]
    xml_names = {s: xmls[s] for s in kept}

    if config.workers == 1:
        _init_worker(config.bank_dir)
        results = [_process(t) for t in tasks]
    else:
        with ProcessPoolExecutor(config.workers, initializer=_init_worker,
                                 initargs=(config.bank_dir,)) as pool:
            results = list(pool.map(_process, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    for r in results:
        r["annotation"] = xml_names[r["stem"]]
        records[r["stem"]] = r

    ordered = [records[s] for s in sorted(records)]
    counts = {st: sum(1 for r in ordered if r["status"] == st) for st in STATUSES}
    counts.update(input_images=len(ordered), selected=len(selected),
                  written=counts[AUGMENTED] + counts[PASSED])
    manifest = {
        "schema": RUN_SCHEMA,
        "config": config_snapshot(config, config.bank_dir),
        "bank": {"dir": os.path.abspath(config.bank_dir),
                 "manifest_sha256": lightbank.bank_digest(config.bank_dir),
                 "patch_count": _bank_size(config.bank_dir)},
        "counts": counts,
        "unpaired": {"images": unpaired_images, "annotations": unpaired_xml},
        "records": ordered,
    }
    with open(os.path.join(config.out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    log.info("augment: %s", counts)
    return manifest


def _bank_size(bank_dir):
    with open(os.path.join(bank_dir, "manifest.json"), encoding="utf-8") as f:
        return len(json.load(f)["patches"])


# -- validate ----------------------------------------------------------------

def load_manifest(out_dir) -> dict:
    path = os.path.join(out_dir, "manifest.json")
    if not os.path.isfile(path):
        raise ManifestMissing(f"no manifest.json in {out_dir}")
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def check_augmented(original, output, anns, params: ProhibitionParams) -> list:
    """Names of the placement rules an augmented frame breaks (empty if none)."""
    if original.shape != output.shape:
        return ["dimensions"]
    changed = placement.changed_pixels(original, output)
    h, w = changed.shape
    kinds = []
    polyps = prohibit.mark_polyp_boxes(anns, w, h)
    if prohibit.prohibited_box_hits(changed, polyps):
        kinds.append("polyp")
    lights = prohibit.mark_light_regions(original, params.threshold, params.iou_threshold)
    if prohibit.prohibited_box_hits(changed, lights):
        kinds.append("light")
    border = prohibit.mark_black_borders(original, params.black_threshold, params.margin_fraction)
    if np.any(changed & border):
        kinds.append("border")
    diff = output[changed]
    if len(diff) and not (np.all(diff[:, 0] == diff[:, 1]) and np.all(diff[:, 1] == diff[:, 2])):
        kinds.append("chromatic")
    return kinds


def cmd_validate(out_dir) -> dict:
    """Re-check every augmented frame against its original."""
    manifest = load_manifest(out_dir)
    cfg = manifest["config"]
    params = ProhibitionParams.from_json(cfg["prohibition"])
    violations = []
    checked = 0
    for rec in manifest["records"]:
        if rec["status"] != AUGMENTED:
            continue
        checked += 1
        stem = rec["stem"]
        out_path = os.path.join(out_dir, "images", rec.get("output", stem + ".png"))
        label_path = os.path.join(out_dir, "labels", stem + ".txt")
        if not os.path.isfile(out_path):
            violations.append({"image": stem, "kinds": ["missing-output"]})
            continue
        original = load_image(os.path.join(cfg["images_dir"], rec["image"]))
        anns = annot.parse_voc_file(os.path.join(cfg["voc_dir"], rec["annotation"]),
                                    cfg["voc_one_based"], cfg["class_names"])
        kinds = check_augmented(original, load_image(out_path), anns, params)
        try:
            with open(label_path, encoding="utf-8") as f:
                if f.read() != annot.yolo_text(anns):
                    kinds.append("labels")
        except FileNotFoundError:
            kinds.append("labels")
        if kinds:
            violations.append({"image": stem, "kinds": kinds})
    return {"checked": checked, "violations": violations}
