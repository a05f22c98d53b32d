use std::str::FromStr;

/// Inclusive grid `start:stop:count`, or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| -> Result<f64, String> {
            let v: f64 = p.trim().parse().map_err(|_| format!("'{p}' is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("'{p}' is not finite"))
            }
        };
        match parts.as_slice() {
            [v] => Ok(Grid(vec![num(v)?])),
            [a, b, n] => {
                let (start, stop) = (num(a)?, num(b)?);
                let count: usize = n.trim().parse().map_err(|_| format!("count '{n}' is not a positive integer"))?;
                match count {
                    0 => Err("grid count must be at least 1".into()),
                    1 if start != stop => Err("a one-point grid needs start == stop".into()),
                    1 => Ok(Grid(vec![start])),
                    _ => {
                        let step = (stop - start) / (count - 1) as f64;
                        let mut v: Vec<f64> = (0..count).map(|i| start + step * i as f64).collect();
                        v[count - 1] = stop;
                        Ok(Grid(v))
                    }
                }
            }
            _ => Err(format!("expected start:stop:count or a number, got '{s}'")),
        }
    }
}
