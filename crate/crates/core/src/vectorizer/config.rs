use crate::error::{Result, VenomError};

#[derive(Debug, Clone, PartialEq)]
pub struct VectorizerConfig {
    /// Latent dimension.
    pub k: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub ffn_width: usize,
    /// Rows kept per dataset; longer datasets are truncated.
    pub max_rows: usize,
    pub max_cols: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub kl_weight: f64,
    pub lr: f64,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            k: 16,
            n_layers: 8,
            n_heads: 4,
            d_model: 64,
            ffn_width: 128,
            max_rows: 3000,
            max_cols: 32,
            epochs: 100,
            batch_size: 8,
            seed: 0,
            kl_weight: 1.0,
            lr: 1e-3,
        }
    }
}

impl VectorizerConfig {
    /// Two blocks and a short row cap, sized for a laptop.
    pub fn desk() -> Self {
        VectorizerConfig {
            n_layers: 2,
            max_rows: 512,
            epochs: 30,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(VenomError::Config(m));
        if self.k < 2 {
            return fail(format!("k must be at least 2, got {}", self.k));
        }
        if self.n_heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return fail(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.max_rows == 0 || self.max_cols == 0 || self.ffn_width == 0 {
            return fail("max_rows, max_cols and ffn_width must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(self.kl_weight > 0.0 && self.kl_weight.is_finite()) {
            return fail(format!("kl_weight must be positive, got {}", self.kl_weight));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        Ok(())
    }

    /// `key=value` lines in a fixed order.
    pub fn to_text(&self) -> String {
        format!(
            "k={}\nn_layers={}\nn_heads={}\nd_model={}\nffn_width={}\nmax_rows={}\nmax_cols={}\nepochs={}\nbatch_size={}\nseed={}\nkl_weight={}\nlr={}\n",
            self.k,
            self.n_layers,
            self.n_heads,
            self.d_model,
            self.ffn_width,
            self.max_rows,
            self.max_cols,
            self.epochs,
            self.batch_size,
            self.seed,
            self.kl_weight,
            self.lr
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = VectorizerConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| VenomError::parse("vectorizer config", format!("no '=' in {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(VenomError::parse("vectorizer config", format!("duplicate key {key}")));
            }
            c.set(key, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Set one field by name, as used by the config file and `--set`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| VenomError::Config(format!("{key}: cannot parse {value:?}")))
        }
        match key {
            "k" => self.k = num(key, value)?,
            "n_layers" => self.n_layers = num(key, value)?,
            "n_heads" => self.n_heads = num(key, value)?,
            "d_model" => self.d_model = num(key, value)?,
            "ffn_width" => self.ffn_width = num(key, value)?,
            "max_rows" => self.max_rows = num(key, value)?,
            "max_cols" => self.max_cols = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "kl_weight" => self.kl_weight = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            _ => return Err(VenomError::Config(format!("unknown vectorizer key {key:?}"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let c = VectorizerConfig {
            k: 8,
            kl_weight: 0.1,
            lr: 3e-4,
            seed: 42,
            ..VectorizerConfig::desk()
        };
        assert_eq!(VectorizerConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn validation() {
        let bad = [
            VectorizerConfig { k: 1, ..Default::default() },
            VectorizerConfig { d_model: 30, n_heads: 4, ..Default::default() },
            VectorizerConfig { kl_weight: 0.0, ..Default::default() },
            VectorizerConfig { max_rows: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(VenomError::Config(_))), "{c:?}");
        }
        VectorizerConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert!(VectorizerConfig::from_text("k=4\nwidth=3\n").is_err());
        assert!(VectorizerConfig::from_text("k=4\nk=5\n").is_err());
    }
}
