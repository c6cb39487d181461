import hashlib
from pathlib import Path


def file_sha256(path) -> str:
    """Hex SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(Path(path), "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def short_hash(text: str) -> bytes:
    """First 8 bytes of SHA-256, used as a compact config fingerprint."""
    return hashlib.sha256(text.encode("utf-8")).digest()[:8]
