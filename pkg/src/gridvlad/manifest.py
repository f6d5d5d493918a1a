"""Dataset manifests: which descriptor file belongs to which class and user.

Line-oriented, tab-separated, one sample per line:

    sample_id <TAB> path <TAB> class_label <TAB> group_id

Lines starting with "#" are comments. A comment of the form
"# classes: N" declares the class count explicitly; otherwise the largest
observed label is used. Paths are resolved relative to the manifest file.
"""

import warnings
from dataclasses import dataclass
from pathlib import Path

_CLASSES_DIRECTIVE = "classes:"


@dataclass(frozen=True)
class SampleMeta:
    sample_id: str
    path: str
    class_label: int
    group_id: str


@dataclass(frozen=True)
class DatasetManifest:
    classes: int
    samples: tuple

    def __post_init__(self):
        if self.classes < 1:
            raise ValueError(f"class count must be positive, got {self.classes}")
        seen = set()
        for s in self.samples:
            if s.sample_id in seen:
                raise ValueError(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)
            if not 1 <= s.class_label <= self.classes:
                raise ValueError(
                    f"sample {s.sample_id!r}: label {s.class_label} outside 1..{self.classes}"
                )
            if not s.group_id:
                raise ValueError(f"sample {s.sample_id!r}: empty group_id")
        present = {s.class_label for s in self.samples}
        missing = sorted(set(range(1, self.classes + 1)) - present)
        if self.samples and missing:
            warnings.warn(f"classes with no samples: {missing}", stacklevel=2)

    def group_ids(self) -> list:
        return sorted({s.group_id for s in self.samples})

    def by_id(self) -> dict:
        return {s.sample_id: s for s in self.samples}


def parse_manifest(path) -> DatasetManifest:
    path = Path(path)
    base = path.parent
    declared_classes = None
    samples = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip("\n")
        if not line.strip():
            continue
        if line.lstrip().startswith("#"):
            body = line.lstrip().lstrip("#").strip().lower()
            if body.startswith(_CLASSES_DIRECTIVE):
                declared_classes = int(body[len(_CLASSES_DIRECTIVE):].strip())
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ValueError(
                f"{path}:{lineno}: expected 4 tab-separated fields, got {len(fields)}"
            )
        sample_id, rel_path, label_str, group_id = (f.strip() for f in fields)
        if not sample_id or not rel_path or not label_str or not group_id:
            raise ValueError(f"{path}:{lineno}: missing field")
        try:
            label = int(label_str)
        except ValueError:
            raise ValueError(
                f"{path}:{lineno}: class_label {label_str!r} is not an integer"
            ) from None
        samples.append(
            SampleMeta(
                sample_id=sample_id,
                path=str((base / rel_path)),
                class_label=label,
                group_id=group_id,
            )
        )
    if declared_classes is not None:
        classes = declared_classes
    elif samples:
        classes = max(s.class_label for s in samples)
    else:
        classes = 1
    return DatasetManifest(classes=classes, samples=tuple(samples))


def write_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    base = path.parent
    lines = [f"# classes: {manifest.classes}"]
    for s in manifest.samples:
        p = Path(s.path)
        try:
            rel = p.relative_to(base)
        except ValueError:
            rel = p
        lines.append(f"{s.sample_id}\t{rel}\t{s.class_label}\t{s.group_id}")
    path.write_text("\n".join(lines) + "\n")
