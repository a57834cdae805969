use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;
use crate::scenario::{ScenarioMask, MODALITY_COUNT};

/// Implicit conditioning: present channels come from `original`, missing ones from `generated`.
pub fn ic_merge<F: Scalar>(
    generated: &Image<F>,
    original: &Image<F>,
    mask: ScenarioMask,
) -> Result<Image<F>> {
    generated.ensure_same_shape(original)?;
    if generated.channels() != MODALITY_COUNT {
        return Err(Error::Shape(format!(
            "expected {MODALITY_COUNT} channels, got {}",
            generated.channels()
        )));
    }
    let mut out = generated.clone();
    for m in mask.present() {
        let c = m.ordinal();
        out.channel_mut(c).copy_from_slice(original.channel(c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_cases() {
        let g = Image::<f32>::filled(4, 2, 2, 7.0);
        let o = Image::<f32>::filled(4, 2, 2, -1.0);
        assert_eq!(ic_merge(&g, &o, ScenarioMask::FULL).unwrap(), o);
        assert_eq!(ic_merge(&g, &o, ScenarioMask::EMPTY).unwrap(), g);
        let m = ic_merge(&g, &o, "0010".parse().unwrap()).unwrap();
        for c in [0, 1, 3] {
            assert_eq!(m.channel(c), g.channel(c));
        }
        assert_eq!(m.channel(2), o.channel(2));
        let small = Image::<f32>::zeros(4, 1, 2);
        assert!(matches!(ic_merge(&g, &small, ScenarioMask::FULL), Err(Error::Shape(_))));
    }
}
