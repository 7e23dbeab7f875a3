"""CT ingestion, windowing, datasets, phantoms and the tensor container format."""

from .dicom import parse_dicom_slice, read_dicom_file
from .files import list_slice_files, load_slices, read_slice, save_png, save_slice
from .patches import item_to_model_array, make_batch, random_crop
from .phantom import PhantomSpec, make_phantom, phantom_rois, phantom_series, phantom_volume
from .slices import CTSlice, DomainDataset, Slab3, stack_neighbors, volume_slabs
from .tensorio import decode_tensor, encode_tensor, read_tensor, write_tensor
from .windowing import (
    DICOM_W_MINUS_1,
    PAPER_W_PLUS_1,
    WindowSpec,
    apply_window,
    denormalize,
    from_model_range,
    invert_window,
    normalize_for_model,
    to_model_range,
)
