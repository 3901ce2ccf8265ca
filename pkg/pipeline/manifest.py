"""
Manifests: plain text, one image path per line, in temporal order.
Lines starting with '#' and blank lines are ignored; relative paths are
resolved against the manifest's directory.
"""
from pathlib import Path

from raster.exceptions import ImageIOError


def read_manifest(path):
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ImageIOError(f"Cannot read manifest {path}: {exc}", path) from exc
    entries = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        entry = Path(line)
        entries.append(entry if entry.is_absolute() else path.parent / entry)
    return entries


def write_manifest(paths, path, header=None):
    """Write ``paths`` relative to the manifest's directory where possible"""
    path = Path(path)
    lines = [f"# {header}"] if header else []
    for entry in paths:
        entry = Path(entry)
        try:
            entry = entry.resolve().relative_to(path.parent.resolve())
        except ValueError:
            pass
        lines.append(entry.as_posix())
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text('\n'.join(lines) + '\n')
    except OSError as exc:
        raise ImageIOError(f"Failed to write manifest {path}: {exc}", path) from exc
