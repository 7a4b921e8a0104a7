"""Raw-data ingestion, augmentation and the line-delimited sample manifest.

A raw directory holds images with a ``.pts`` annotation and (optionally) a
``.box`` face rectangle next to each image. The first directory level below the
raw root names the sample's group; files directly in the root belong to ``all``.

Manifest lines are :class:`SampleRecord` objects whose image paths are relative
to the manifest's directory.
"""

import csv
import logging
import shutil
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.data.geometry import FaceBox, box_from_points, crop_resize, gaussian_blur, hflip, read_box, rotate
from core.data.images import read_image, write_image
from core.data.pts import parse_pts, select_eyes
from core.data.synthetic import SyntheticConfig
from core.errors import EyemarkError, LandmarkOutOfFrameError
from core.heatmap import border_flags
from core.json_bound_model import list_from_jsonl, list_to_jsonl
from core.landmarks import LandmarkSet

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
MANIFEST_NAME = "manifest.jsonl"
DEFAULT_GROUP = "all"
CATEGORIES = ("original", "hflip", "rotated", "blurred")

Tag = Literal["original", "hflip", "rot-10", "rot-5", "rot+5", "rot+10", "blur"]


class DataConfig(BaseModel):
    """Configuration of the data pipeline.

    Attributes:
        sigma (float): Ground-truth Gaussian standard deviation in heatmap cells.
        flip (bool): Emit a mirrored copy of every original.
        rotations (List[float]): Rotation angles in degrees.
        blur (bool): Emit a Gaussian-blurred copy of every original.
        box_from_points (bool): Derive a box from the annotation when no ``.box`` exists.
        box_margin (float): Enlargement per side of the derived box.
        val_fraction (float): Share of sources held out when no validation manifest is given.
        synthetic (SyntheticConfig): Synthetic fixture settings.
    """
    model_config = ConfigDict(extra = "forbid")

    sigma : float = 5.0
    flip : bool = True
    rotations : List[float] = Field(default_factory = lambda: [-10.0, -5.0, 5.0, 10.0])
    blur : bool = True
    box_from_points : bool = False
    box_margin : float = 0.25
    val_fraction : float = 0.2
    synthetic : SyntheticConfig = Field(default_factory = SyntheticConfig)

    @field_validator("sigma")
    @classmethod
    def _sigma_positive(cls, value : float) -> float:
        if not value > 0:
            raise ValueError("data.sigma must be positive")
        return value

    @field_validator("rotations")
    @classmethod
    def _rotation_set(cls, value : List[float]) -> List[float]:
        for angle in value:
            if angle not in (-10.0, -5.0, 5.0, 10.0):
                raise ValueError(f"data.rotations accepts -10, -5, 5 and 10 degrees, got {angle}")
        return sorted(set(value))

    @field_validator("val_fraction")
    @classmethod
    def _fraction_range(cls, value : float) -> float:
        if not 0 <= value < 1:
            raise ValueError("data.val_fraction must lie in [0, 1)")
        return value


class SampleRecord(BaseModel):
    """One manifest line.

    Attributes:
        image (str): Image path relative to the manifest directory.
        source (str): Raw sample id (path below the raw root without suffix).
        group (str): Group of the raw sample.
        box (FaceBox): Face box in raw image pixels.
        points (List[Tuple[float, float]]): The 12 eye landmarks in the cropped frame.
        width (int): Cropped frame width.
        height (int): Cropped frame height.
        tag (Tag): Augmentation that produced the image.
        near_border (bool): A landmark lies within 2σ of the heatmap border.
    """
    image : str
    source : str
    group : str = DEFAULT_GROUP
    box : FaceBox
    points : List[Tuple[float, float]]
    width : int
    height : int
    tag : Tag = "original"
    near_border : bool = False

    def landmarks(self) -> LandmarkSet:
        return LandmarkSet(points = np.asarray(self.points), width = self.width, height = self.height)


class AugmentationSummary(BaseModel):
    """Record counts per category and group, plus drops per tag."""
    groups : List[str] = Field(default_factory = list)
    counts : Dict[str, Dict[str, int]] = Field(default_factory = dict)
    dropped : Dict[str, int] = Field(default_factory = dict)
    skipped : int = 0

    def rows(self) -> List[List]:
        """Table rows ``[category, n_group..., total]`` for every category and a total row."""
        header = ["category", *self.groups, "total"]
        table = [header]
        for category in CATEGORIES:
            per_group = self.counts.get(category, {})
            table.append([category, *[per_group.get(g, 0) for g in self.groups], per_group.get("total", 0)])
        table.append(["total", *[sum(r[i + 1] for r in table[1:]) for i in range(len(self.groups) + 1)]])
        return table

    def write_csv(self, path : Path) -> Path:
        with path.open("w", encoding = "utf-8", newline = "") as file:
            csv.writer(file, lineterminator = "\n").writerows(self.rows())
        return path


def category_of(tag : str) -> str:
    if tag.startswith("rot"):
        return "rotated"
    return {"original": "original", "hflip": "hflip", "blur": "blurred"}[tag]


def rotation_tag(angle : float) -> str:
    return f"rot{angle:+g}"


def summarize(records : Iterable[SampleRecord], dropped : Optional[Dict[str, int]] = None, skipped : int = 0) -> AugmentationSummary:
    records = list(records)
    groups = sorted({r.group for r in records})
    counts : Dict[str, Dict[str, int]] = {c: {g: 0 for g in groups} | {"total": 0} for c in CATEGORIES}
    for record in records:
        row = counts[category_of(record.tag)]
        row[record.group] += 1
        row["total"] += 1
    return AugmentationSummary(groups = groups, counts = counts, dropped = dict(dropped or {}), skipped = skipped)


def write_manifest(records : Iterable[SampleRecord], path : Path) -> int:
    return list_to_jsonl(records, path)


def read_manifest(path : Path) -> List[SampleRecord]:
    """Reads a manifest.

    Raises:
        OSError: If the file cannot be read.
        EyemarkError: If a line is not a valid record.
    """
    return list_from_jsonl(Path(path), SampleRecord)


def discover_raw(raw_dir : Path) -> List[Path]:
    """Images below ``raw_dir``, sorted by path."""
    if not raw_dir.is_dir():
        raise FileNotFoundError(f"raw directory not found: {raw_dir}")
    return sorted(p for p in raw_dir.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def group_of(raw_dir : Path, image_path : Path) -> str:
    parts = image_path.relative_to(raw_dir).parts
    return parts[0] if len(parts) > 1 else DEFAULT_GROUP


def _resolve_box(image_path : Path, points68 : np.ndarray, width : int, height : int, config : DataConfig) -> FaceBox:
    sidecar = image_path.with_suffix(".box")
    if sidecar.exists():
        return read_box(sidecar)
    if config.box_from_points:
        return box_from_points(points68, width, height, config.box_margin)
    raise EyemarkError("no .box sidecar (set data.box_from_points to derive one)")


def _make_record(image : str, source : str, group : str, box : FaceBox, landmarks : LandmarkSet, tag : str, sigma : float) -> SampleRecord:
    hm = landmarks.width // 4, landmarks.height // 4
    return SampleRecord(
        image = image,
        source = source,
        group = group,
        box = box,
        points = [tuple(p) for p in landmarks.points.tolist()],
        width = landmarks.width,
        height = landmarks.height,
        tag = tag,
        near_border = bool(border_flags(landmarks, hm[1], hm[0], sigma).any())
    )


def preprocess_raw(raw_dir : Path, out_dir : Path, config : DataConfig, size : int) -> Tuple[List[SampleRecord], int]:
    """Crops every raw sample to ``size`` × ``size`` and writes it under ``out_dir/original``.

    Samples that cannot be used (unreadable image, malformed ``.pts``, missing box,
    landmark outside the box) are skipped and logged.

    Returns:
        Tuple[List[SampleRecord], int]: Records in path order, and the number of skipped samples.
    """
    records : List[SampleRecord] = []
    skipped = 0
    for image_path in discover_raw(raw_dir):
        rel = image_path.relative_to(raw_dir).with_suffix("")
        try:
            pts_path = image_path.with_suffix(".pts")
            if not pts_path.exists():
                raise EyemarkError("no .pts annotation")
            annotation = parse_pts(pts_path)
            image = read_image(image_path)
            height, width = image.shape[:2]
            box = _resolve_box(image_path, annotation.as_array(), width, height, config)
            landmarks = select_eyes(annotation, width, height)
            cropped, local = crop_resize(image, box, landmarks, size)
        except (EyemarkError, ValueError, OSError) as e:
            logger.warning(f"Skipping {image_path}: {e}")
            skipped += 1
            continue

        target = Path("original") / rel.with_suffix(".png")
        write_image(out_dir / target, cropped)
        records.append(_make_record(
            target.as_posix(), rel.as_posix(), group_of(raw_dir, image_path), box, local, "original", config.sigma
        ))
    logger.info(f"Preprocessed {len(records)} samples from {raw_dir} ({skipped} skipped)")
    return records, skipped


def augment_records(
    records : Iterable[SampleRecord],
    source_dir : Path,
    out_dir : Path,
    config : DataConfig
) -> Tuple[List[SampleRecord], AugmentationSummary]:
    """Expands every original into original, mirrored, rotated and blurred records.

    Images are written to ``out_dir/<tag>/<source>.png``; the original image file is
    copied unchanged. A variant whose landmarks leave the frame is dropped and counted.

    Args:
        records (Iterable[SampleRecord]): Records of a preprocess manifest.
        source_dir (Path): Directory the input image paths are relative to.
        out_dir (Path): Directory of the output manifest.
        config (DataConfig): Which augmentations to emit.

    Returns:
        Tuple[List[SampleRecord], AugmentationSummary]: Output records and the count table.
    """
    out : List[SampleRecord] = []
    dropped : Dict[str, int] = {}
    skipped = 0
    for record in records:
        if record.tag != "original":
            logger.warning(f"Ignoring non-original record {record.image} ({record.tag})")
            skipped += 1
            continue
        src = source_dir / record.image
        try:
            image = read_image(src)
        except OSError as e:
            logger.warning(f"Skipping {src}: {e}")
            skipped += 1
            continue
        landmarks = record.landmarks()

        variants = [("original", None)]
        if config.flip:
            variants.append(("hflip", lambda: hflip(image, landmarks)))
        for angle in config.rotations:
            variants.append((rotation_tag(angle), lambda a = angle: rotate(image, landmarks, a)))
        if config.blur:
            variants.append(("blur", lambda: (gaussian_blur(image), landmarks)))

        for tag, make in variants:
            target = Path(tag) / Path(record.source).with_suffix(".png")
            if make is None:
                (out_dir / target).parent.mkdir(parents = True, exist_ok = True)
                shutil.copyfile(src, out_dir / target)
                variant_landmarks = landmarks
            else:
                try:
                    variant_image, variant_landmarks = make()
                except LandmarkOutOfFrameError as e:
                    logger.warning(f"Dropping {tag} of {record.source}: {e}")
                    dropped[tag] = dropped.get(tag, 0) + 1
                    continue
                write_image(out_dir / target, variant_image)
            out.append(_make_record(
                target.as_posix(), record.source, record.group, record.box, variant_landmarks, tag, config.sigma
            ))

    summary = summarize(out, dropped, skipped)
    logger.info(f"Augmented {len(out)} records ({sum(dropped.values())} dropped)")
    return out, summary


def build_manifest(raw_dir : Path, out_dir : Path, config : DataConfig, size : int) -> Tuple[List[SampleRecord], AugmentationSummary]:
    """Preprocesses and augments ``raw_dir`` into ``out_dir`` and writes ``out_dir/manifest.jsonl``."""
    staging = out_dir / ".preprocessed"
    originals, skipped = preprocess_raw(raw_dir, staging, config, size)
    records, summary = augment_records(originals, staging, out_dir, config)
    summary.skipped += skipped
    shutil.rmtree(staging, ignore_errors = True)
    write_manifest(records, out_dir / MANIFEST_NAME)
    return records, summary


def split_by_source(records : List[SampleRecord], val_fraction : float, seed : int) -> Tuple[List[SampleRecord], List[SampleRecord]]:
    """Holds out whole sources (all augmentations of a raw sample) for validation."""
    sources = sorted({r.source for r in records})
    count = int(round(val_fraction * len(sources)))
    if val_fraction > 0 and len(sources) > 1:
        count = min(max(count, 1), len(sources) - 1)
    order = np.random.default_rng(seed).permutation(len(sources))
    held_out = {sources[i] for i in order[:count]}
    train = [r for r in records if r.source not in held_out]
    val = [r for r in records if r.source in held_out]
    return train, val
