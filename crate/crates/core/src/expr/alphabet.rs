use std::collections::BTreeSet;

/// Complex-side symbols: source variables, first derivative, and the target
/// variables of a point transformation.
pub const COMPLEX_SYMBOLS: [&str; 6] = ["z", "u", "up", "Z", "U", "Up"];

/// Real-side symbols produced by realification.
pub const REAL_SYMBOLS: [&str; 12] = ["x", "y", "f", "g", "h", "l", "X", "Y", "F", "G", "H", "L"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Complex,
    Real,
    Parameter,
}

/// Set of identifiers an expression may use.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    symbols: BTreeSet<String>,
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Alphabet {
            symbols: symbols.into_iter().map(Into::into).collect(),
        }
    }

    /// Complex alphabet plus the given parameter names.
    pub fn complex<S: AsRef<str>>(params: &[S]) -> Self {
        let mut a = Alphabet::new(COMPLEX_SYMBOLS);
        a.extend(params.iter().map(|p| p.as_ref().to_string()));
        a
    }

    pub fn real<S: AsRef<str>>(params: &[S]) -> Self {
        let mut a = Alphabet::new(REAL_SYMBOLS);
        a.extend(params.iter().map(|p| p.as_ref().to_string()));
        a
    }

    /// Union of the complex and real alphabets with parameters.
    pub fn any<S: AsRef<str>>(params: &[S]) -> Self {
        let mut a = Alphabet::complex(params);
        a.extend(REAL_SYMBOLS.iter().map(|s| s.to_string()));
        a
    }

    pub fn extend<I: IntoIterator<Item = String>>(&mut self, more: I) {
        self.symbols.extend(more);
    }

    pub fn with(mut self, name: &str) -> Self {
        self.symbols.insert(name.to_string());
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.symbols.contains(name)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().map(String::as_str)
    }
}

pub fn kind_of(name: &str) -> SymbolKind {
    if COMPLEX_SYMBOLS.contains(&name) {
        SymbolKind::Complex
    } else if REAL_SYMBOLS.contains(&name) {
        SymbolKind::Real
    } else {
        SymbolKind::Parameter
    }
}
