"""Builds minimal uncompressed CT DICOM files in memory for the ingestion tests."""

import io

import numpy as np
from pydicom.encaps import encapsulate
from pydicom.dataset import FileDataset, FileMetaDataset
from pydicom.uid import CTImageStorage, ExplicitVRLittleEndian, RLELossless, generate_uid


def make_dicom(stored, slope=1.0, intercept=-1024.0, kv=120, thickness=1.0, drop=(), transfer_syntax=ExplicitVRLittleEndian,
               instance=1, series_uid="1.2.3") -> bytes:
    stored = np.asarray(stored, dtype=np.uint16)
    meta = FileMetaDataset()
    meta.MediaStorageSOPClassUID = CTImageStorage
    meta.MediaStorageSOPInstanceUID = generate_uid()
    meta.TransferSyntaxUID = transfer_syntax
    ds = FileDataset(None, {}, file_meta=meta, preamble=b"\0" * 128)
    ds.SOPClassUID = CTImageStorage
    ds.SOPInstanceUID = meta.MediaStorageSOPInstanceUID
    ds.Modality = "CT"
    ds.SeriesInstanceUID = series_uid
    ds.InstanceNumber = instance
    ds.KVP = kv
    ds.SliceThickness = thickness
    ds.PixelSpacing = [0.7, 0.7]
    ds.Rows, ds.Columns = stored.shape
    ds.SamplesPerPixel = 1
    ds.PhotometricInterpretation = "MONOCHROME2"
    ds.BitsAllocated = 16
    ds.BitsStored = 16
    ds.HighBit = 15
    ds.PixelRepresentation = 0
    ds.RescaleSlope = slope
    ds.RescaleIntercept = intercept
    ds.PixelData = stored.tobytes()
    if transfer_syntax.is_compressed:
        ds.PixelData = encapsulate([stored.tobytes()])
    for tag in drop:
        delattr(ds, tag)
    buf = io.BytesIO()
    ds.save_as(buf, enforce_file_format=True)
    return buf.getvalue()


__all__ = ["make_dicom", "RLELossless"]
