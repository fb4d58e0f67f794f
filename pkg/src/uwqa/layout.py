"""Dataset directory conventions: parallel corpora of original and enhanced images."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import LayoutError

ORIGINAL_MODEL = "original"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass
class DatasetLayout:
    root: Path
    models: list[str]          # includes "original", first
    image_ids: list[str]       # file stems, sorted
    files: dict[tuple[str, str], Path]  # (model, image id) -> path

    def path(self, model: str, image_id: str) -> Path | None:
        return self.files.get((model, image_id))


def _images_in(directory: Path) -> dict[str, Path]:
    found = {}
    for p in sorted(directory.iterdir()):
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES:
            if p.stem in found:
                raise LayoutError(f"duplicate image id {p.stem!r} in {directory}")
            found[p.stem] = p
    return found


def scan_layout(root) -> DatasetLayout:
    """Discover the original corpus and every parallel model corpus.

    Every model subdirectory must contain exactly the image ids present in
    original/ (matched by file stem; extensions may differ).
    """
    root = Path(root)
    orig_dir = root / ORIGINAL_MODEL
    if not orig_dir.is_dir():
        raise LayoutError(f"missing {ORIGINAL_MODEL}/ under {root}")
    originals = _images_in(orig_dir)
    if not originals:
        raise LayoutError(f"no images in {orig_dir}")

    models = [ORIGINAL_MODEL]
    files: dict[tuple[str, str], Path] = {
        (ORIGINAL_MODEL, stem): p for stem, p in originals.items()
    }
    for sub in sorted(root.iterdir()):
        if not sub.is_dir() or sub.name == ORIGINAL_MODEL or sub.name.startswith("."):
            continue
        imgs = _images_in(sub)
        missing = sorted(set(originals) - set(imgs))
        extra = sorted(set(imgs) - set(originals))
        if missing or extra:
            raise LayoutError(
                f"model {sub.name!r} does not mirror original/: "
                f"missing {missing[:3]}, extra {extra[:3]}"
            )
        models.append(sub.name)
        for stem, p in imgs.items():
            files[(sub.name, stem)] = p
    return DatasetLayout(
        root=root,
        models=models,
        image_ids=sorted(originals),
        files=files,
    )
