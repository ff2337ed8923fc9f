//! Textual type notation shared by declarations, trace snapshots, and
//! bug-template free variables.
//!
//! A type string is zero or more array dimensions, then zero or more pointer
//! stars, then a base name: `int`, `*char`, `**int`, `[11]char`, `[4]*int`.
//! Pointers to arrays are not expressible, matching the declarator subset of
//! the surface grammar.

use std::fmt;
use thiserror::Error;

/// Size in bytes of `int` (64-bit signed).
pub const INT_SIZE: u64 = 8;
/// Size in bytes of `char` (8-bit signed).
pub const CHAR_SIZE: u64 = 1;
/// Size in bytes of any pointer.
pub const PTR_SIZE: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Base {
    Int,
    Char,
    Void,
}

impl Base {
    pub fn name(self) -> &'static str {
        match self {
            Base::Int => "int",
            Base::Char => "char",
            Base::Void => "void",
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid type string {0:?}")]
pub struct TypeParseError(pub String);

/// A parsed type string. `dims` are outermost-first array dimensions and
/// apply before `stars`, so `[4]*int` is an array of four int pointers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Type {
    pub dims: Vec<u32>,
    pub stars: u8,
    pub base: Base,
}

impl Type {
    pub fn base(base: Base) -> Type {
        Type { dims: Vec::new(), stars: 0, base }
    }

    pub fn ptr(base: Base, stars: u8) -> Type {
        Type { dims: Vec::new(), stars, base }
    }

    /// The `void` unit type (legal only as a function return type).
    pub fn void() -> Type {
        Type::base(Base::Void)
    }

    pub fn is_void_unit(&self) -> bool {
        self.dims.is_empty() && self.stars == 0 && self.base == Base::Void
    }

    pub fn is_pointer(&self) -> bool {
        self.dims.is_empty() && self.stars > 0
    }

    /// Exactly `*void`, the wildcard pointer in assignments and casts.
    pub fn is_void_ptr(&self) -> bool {
        self.dims.is_empty() && self.stars == 1 && self.base == Base::Void
    }

    pub fn is_array(&self) -> bool {
        !self.dims.is_empty()
    }

    /// int or char scalar.
    pub fn is_int_like(&self) -> bool {
        self.dims.is_empty()
            && self.stars == 0
            && matches!(self.base, Base::Int | Base::Char)
    }

    /// Scalar value types: int, char, or pointer. These are the types a
    /// variable snapshot carries and the only legal element targets of a
    /// memory read or write.
    pub fn is_scalar(&self) -> bool {
        self.is_int_like() || self.is_pointer()
    }

    /// Type of one indexing step: `[N]T -> T`, `*T -> T`.
    pub fn elem(&self) -> Option<Type> {
        if !self.dims.is_empty() {
            Some(Type { dims: self.dims[1..].to_vec(), stars: self.stars, base: self.base })
        } else if self.stars > 0 {
            Some(Type { dims: Vec::new(), stars: self.stars - 1, base: self.base })
        } else {
            None
        }
    }

    /// Array-to-pointer decay for rvalue use. Single-dimension arrays decay
    /// to a pointer to their element; multi-dimension arrays would need a
    /// pointer-to-array type, which the notation cannot express, so they do
    /// not decay. Non-arrays are returned unchanged.
    pub fn decayed(&self) -> Option<Type> {
        match self.dims.len() {
            0 => Some(self.clone()),
            1 => Some(Type { dims: Vec::new(), stars: self.stars + 1, base: self.base }),
            _ => None,
        }
    }

    /// Storage size in bytes. `None` for the void unit type and for arrays
    /// of it.
    pub fn size_in_bytes(&self) -> Option<u64> {
        let elem = if self.stars > 0 {
            PTR_SIZE
        } else {
            match self.base {
                Base::Int => INT_SIZE,
                Base::Char => CHAR_SIZE,
                Base::Void => return None,
            }
        };
        let mut total = elem;
        for d in &self.dims {
            total = total.checked_mul(u64::from(*d))?;
        }
        Some(total)
    }

    /// Well-formedness: dimensions are nonzero and `void` only appears
    /// behind at least one star or as the bare unit type.
    pub fn is_well_formed(&self) -> bool {
        if self.dims.iter().any(|d| *d == 0) {
            return false;
        }
        if self.base == Base::Void && self.stars == 0 && !self.dims.is_empty() {
            return false;
        }
        true
    }

    /// Parse the textual notation. No interior whitespace is allowed.
    pub fn parse(text: &str) -> Result<Type, TypeParseError> {
        let err = || TypeParseError(text.to_string());
        let mut rest = text;
        let mut dims = Vec::new();
        while let Some(tail) = rest.strip_prefix('[') {
            let close = tail.find(']').ok_or_else(err)?;
            let digits = &tail[..close];
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let n: u32 = digits.parse().map_err(|_| err())?;
            if n == 0 {
                return Err(err());
            }
            dims.push(n);
            rest = &tail[close + 1..];
        }
        let mut stars = 0u8;
        while let Some(tail) = rest.strip_prefix('*') {
            stars = stars.checked_add(1).ok_or_else(err)?;
            rest = tail;
        }
        let base = match rest {
            "int" => Base::Int,
            "char" => Base::Char,
            "void" => Base::Void,
            _ => return Err(err()),
        };
        let ty = Type { dims, stars, base };
        if !ty.is_well_formed() {
            return Err(err());
        }
        Ok(ty)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.dims {
            write!(f, "[{d}]")?;
        }
        for _ in 0..self.stars {
            f.write_str("*")?;
        }
        f.write_str(self.base.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_paper_notation() {
        for text in ["int", "char", "*char", "**int", "[11]char", "[4]*int", "*void"] {
            let ty = Type::parse(text).unwrap();
            assert_eq!(ty.to_string(), text);
        }
    }

    #[test]
    fn rejects_malformed() {
        for text in ["", "float", "[0]int", "[]int", "* int", "[2]void", "int*", "[2][3]void"] {
            assert!(Type::parse(text).is_err(), "{text:?} should not parse");
        }
    }

    #[test]
    fn sizes() {
        assert_eq!(Type::parse("int").unwrap().size_in_bytes(), Some(8));
        assert_eq!(Type::parse("char").unwrap().size_in_bytes(), Some(1));
        assert_eq!(Type::parse("**char").unwrap().size_in_bytes(), Some(8));
        assert_eq!(Type::parse("[11]char").unwrap().size_in_bytes(), Some(11));
        assert_eq!(Type::parse("[100][100]int").unwrap().size_in_bytes(), Some(80_000));
        assert_eq!(Type::void().size_in_bytes(), None);
    }

    #[test]
    fn decay_and_elem() {
        let buf = Type::parse("[100][100]int").unwrap();
        assert_eq!(buf.elem().unwrap().to_string(), "[100]int");
        assert_eq!(buf.elem().unwrap().elem().unwrap().to_string(), "int");
        assert_eq!(buf.decayed(), None);
        let one = Type::parse("[10]int").unwrap();
        assert_eq!(one.decayed().unwrap().to_string(), "*int");
        let p = Type::parse("*char").unwrap();
        assert_eq!(p.elem().unwrap().to_string(), "char");
    }
}
