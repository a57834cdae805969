//! Thin NIfTI-1 adapter over the `nifti` crate.

use std::path::Path;

use ndarray::{Array3, ShapeBuilder};
use nifti::writer::WriterOptions;
use nifti::{DataElement, IntoNdArray, NiftiHeader, NiftiObject, NiftiType, ReaderOptions};

use crate::error::{Error, Result};
use crate::image::Volume;

/// Geometry metadata carried from input to exported volumes.
pub type GeometryHeader = NiftiHeader;

fn nifti_err(path: &Path) -> impl FnOnce(nifti::NiftiError) -> Error + '_ {
    move |source| Error::Nifti {
        path: path.to_path_buf(),
        source,
    }
}

fn read_as<T: DataElement + Copy>(path: &Path) -> Result<(Volume<T>, NiftiHeader)> {
    let obj = ReaderOptions::new()
        .read_file(path)
        .map_err(nifti_err(path))?;
    let header = obj.header().clone();
    let array = obj
        .into_volume()
        .into_ndarray::<T>()
        .map_err(nifti_err(path))?;
    let shape = array.shape().to_vec();
    let dims = match shape.as_slice() {
        [x, y, z] => [*x, *y, *z],
        [x, y, z, 1] => [*x, *y, *z],
        other => {
            return Err(Error::Data(format!(
                "{} has {}-D shape {other:?}; expected a 3-D volume",
                path.display(),
                other.len()
            )))
        }
    };
    // NIfTI storage order is x fastest, which is ndarray's Fortran order.
    let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                data.push(if shape.len() == 3 {
                    array[[x, y, z]]
                } else {
                    array[[x, y, z, 0]]
                });
            }
        }
    }
    Ok((Volume::from_vec(dims, data)?, header))
}

pub fn read_volume(path: &Path) -> Result<(Volume<f32>, GeometryHeader)> {
    let (v, h) = read_as::<f32>(path)?;
    if let Some(bad) = v.data().iter().find(|x| !x.is_finite()) {
        return Err(Error::Data(format!(
            "{} contains non-finite intensity {bad}",
            path.display()
        )));
    }
    Ok((v, h))
}

/// Reads an integer label map; values are rounded and must fit in `u8`.
pub fn read_labels(path: &Path) -> Result<Volume<u8>> {
    let (v, _) = read_as::<f32>(path)?;
    let mut out = Vec::with_capacity(v.len());
    for (i, &x) in v.data().iter().enumerate() {
        let r = x.round();
        if !(0.0..=255.0).contains(&r) || (x - r).abs() > 1e-3 {
            return Err(Error::Data(format!(
                "{} voxel {i} holds non-label value {x}",
                path.display()
            )));
        }
        out.push(r as u8);
    }
    Volume::from_vec(v.dims(), out)
}

fn to_array<T: Copy>(volume: &Volume<T>) -> Array3<T> {
    let [x, y, z] = volume.dims();
    Array3::from_shape_vec((x, y, z).f(), volume.data().to_vec()).expect("volume shape")
}

fn writer_header(reference: &GeometryHeader, datatype: NiftiType) -> GeometryHeader {
    let mut h = reference.clone();
    h.datatype = datatype as i16;
    h.bitpix = (datatype.size_of() * 8) as i16;
    h.scl_slope = 1.0;
    h.scl_inter = 0.0;
    h
}

pub fn write_volume(path: &Path, volume: &Volume<f32>, reference: &GeometryHeader) -> Result<()> {
    let header = writer_header(reference, NiftiType::Float32);
    WriterOptions::new(path)
        .reference_header(&header)
        .write_nifti(&to_array(volume))
        .map_err(nifti_err(path))
}

pub fn write_labels(path: &Path, volume: &Volume<u8>, reference: &GeometryHeader) -> Result<()> {
    let header = writer_header(reference, NiftiType::Uint8);
    WriterOptions::new(path)
        .reference_header(&header)
        .write_nifti(&to_array(volume))
        .map_err(nifti_err(path))
}

/// A default header with unit spacing, for synthetic data.
pub fn default_header(dims: [usize; 3]) -> GeometryHeader {
    let mut h = NiftiHeader::default();
    h.dim = [3, dims[0] as u16, dims[1] as u16, dims[2] as u16, 1, 1, 1, 1];
    h.pixdim = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_and_label_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let dims = [5, 4, 3];
        let v = Volume::from_fn(dims, |x, y, z| (x + 10 * y + 100 * z) as f32 * 0.5);
        let mut header = default_header(dims);
        header.pixdim[1] = 0.9;
        let path = dir.path().join("v.nii.gz");
        write_volume(&path, &v, &header).unwrap();
        let (back, h) = read_volume(&path).unwrap();
        assert_eq!(back, v);
        assert_eq!(h.pixdim[1], 0.9);

        let labels = Volume::from_fn(dims, |x, _, _| [0u8, 1, 2, 4, 0][x]);
        let lpath = dir.path().join("seg.nii.gz");
        write_labels(&lpath, &labels, &header).unwrap();
        assert_eq!(read_labels(&lpath).unwrap(), labels);
    }
}
