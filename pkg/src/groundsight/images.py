"""Image references and region-of-interest cropping.

An ImageRef points at pixels without holding a decoded copy: either a file
path or inline bytes, with dimensions filled in on first decode. Crops are
re-encoded as PNG so cropped refs stay self-contained and deterministic.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .errors import DecodeError
from .geometry import BBox, ImageDims, raster_bounds


@dataclass
class ImageRef:
    """Reference to an image by path or inline bytes (exactly one of the two).

    ``dims`` starts unset and is populated on decode; refs are shared
    read-only between pipeline workers, and the lazy dims fill-in is
    idempotent, so the benign write race is harmless.
    """

    image_id: str
    path: Path | None = None
    data: bytes | None = None
    dims: ImageDims | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if (self.path is None) == (self.data is None):
            raise ValueError("exactly one of path or data must be set")
        if self.path is not None:
            self.path = Path(self.path)

    def read_bytes(self) -> bytes:
        if self.data is not None:
            return self.data
        assert self.path is not None
        return self.path.read_bytes()

    def decode(self) -> Image.Image:
        """Decode to a PIL image, filling in ``dims``.

        Raises:
            DecodeError: when the bytes are not a readable image.
        """
        try:
            img = Image.open(io.BytesIO(self.read_bytes()))
            img.load()
        except (UnidentifiedImageError, OSError) as exc:
            raise DecodeError(f"cannot decode image {self.image_id!r}: {exc}") from exc
        self.dims = ImageDims(img.width, img.height)
        return img

    def ensure_dims(self) -> ImageDims:
        if self.dims is None:
            self.decode()
        assert self.dims is not None
        return self.dims


def crop_region(image: ImageRef, box: BBox) -> ImageRef:
    """Cut the sub-image covering exactly ``box`` out of ``image``.

    The box must already be clamped to the image frame and have positive
    area. Extents are rasterized with floor/ceil half-open semantics; the
    result's dimensions equal the rasterized extent. The crop is returned as
    an inline-PNG ref whose id extends the source id with the pixel bounds,
    so repeated crops of the same region share an id.
    """
    img = image.decode()
    dims = image.dims
    assert dims is not None
    left, top, right, bottom = raster_bounds(box, dims)
    if right <= left or bottom <= top:
        raise ValueError(f"crop box {box.as_tuple()} has no pixel extent")
    cropped = img.crop((left, top, right, bottom))
    buf = io.BytesIO()
    cropped.save(buf, format="PNG")
    return ImageRef(
        image_id=f"{image.image_id}#crop-{left}-{top}-{right}-{bottom}",
        data=buf.getvalue(),
        dims=ImageDims(right - left, bottom - top),
    )
