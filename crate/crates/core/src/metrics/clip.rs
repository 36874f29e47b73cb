use super::MetricError;

/// Default multiplier putting cosines on the familiar 0–100 scale.
pub const CLIP_SCALE: f64 = 100.0;

/// `scale × max(cos(a, b), 0)`.
pub fn clip_score<T: Copy + Into<f64>>(
    image: &[T],
    text: &[T],
    scale: f64,
) -> Result<f64, MetricError> {
    if image.len() != text.len() {
        return Err(MetricError::Shape {
            left: image.len(),
            right: text.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in image.iter().zip(text) {
        let (x, y) = (x.into(), y.into());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::Domain("zero-norm vector".into()));
    }
    let cos = (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0);
    Ok(scale * cos.max(0.0))
}
