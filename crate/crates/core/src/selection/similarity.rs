use crate::error::{Result, VenomError};

fn check_len(op: &'static str, u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() || u.is_empty() {
        return Err(VenomError::Contract(format!(
            "{op}: vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(())
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len("cosine_similarity", u, v)?;
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(VenomError::DegenerateVector("zero-norm vector under cosine similarity".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn euclidean_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len("euclidean_distance", u, v)?;
    Ok(squared_distance(u, v).sqrt())
}

pub(crate) fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1., 0.], &[0., 1.]).unwrap(), 0.0);
        assert!((cosine_similarity(&[2., 2.], &[1., 1.]).unwrap() - 1.0).abs() < 1e-15);
        let expect = 32.0 / (14.0f64 * 77.0).sqrt();
        assert!((cosine_similarity(&[1., 2., 3.], &[4., 5., 6.]).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.974631).abs() < 1e-6);
        assert!(matches!(cosine_similarity(&[0., 0.], &[1., 1.]), Err(VenomError::DegenerateVector(_))));
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean_distance(&[1., 2.], &[1., 2.]).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&[0., 0.], &[3., 4.]).unwrap(), 5.0);
        assert!(matches!(euclidean_distance(&[0.], &[3., 4.]), Err(VenomError::Contract(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn triangle_inequality(u in proptest::collection::vec(-10f64..10.0, 4),
                               v in proptest::collection::vec(-10f64..10.0, 4),
                               w in proptest::collection::vec(-10f64..10.0, 4)) {
            let uw = euclidean_distance(&u, &w).unwrap();
            let uv = euclidean_distance(&u, &v).unwrap();
            let vw = euclidean_distance(&v, &w).unwrap();
            prop_assert!(uw <= uv + vw + 1e-12);
            prop_assert_eq!(uv, euclidean_distance(&v, &u).unwrap());
        }
    }
}
