import numpy as np
import pytest

from qlfquant import (
    RgbImage,
    ScalarField,
    SlicParams,
    segment_image,
)
from qlfquant.phantom import generate_phantom


def make_field(values) -> ScalarField:
    arr = np.asarray(values, dtype=np.float64)
    return ScalarField(width=arr.shape[1], height=arr.shape[0], values=arr)


def make_rgb(pixels) -> RgbImage:
    arr = np.asarray(pixels, dtype=np.uint8)
    return RgbImage(width=arr.shape[1], height=arr.shape[0], pixels=arr)


@pytest.fixture(scope="session")
def small_phantom():
    return generate_phantom(seed=7, width=96, height=96)


@pytest.fixture(scope="session")
def small_result(small_phantom):
    return segment_image(
        small_phantom.image,
        SlicParams(k=36, compactness=0.25),
        image_id="small-phantom",
    )
