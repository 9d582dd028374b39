//! The cart: objects set aside for refinement or as background for later agent calls.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CartPurpose {
    Refine,
    Background,
}

impl std::str::FromStr for CartPurpose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "REFINE" => Ok(Self::Refine),
            "BACKGROUND" => Ok(Self::Background),
            other => Err(format!("unknown cart purpose {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartItem {
    pub object_id: String,
    /// Collection or wrapper cache the object came from.
    pub source: String,
    pub purpose: CartPurpose,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cart {
    pub items: Vec<CartItem>,
}

impl Cart {
    /// Adds `item` unless its (object_id, source) pair is already present, in
    /// which case the existing entry's purpose is updated. Returns true when
    /// the cart grew.
    pub fn add(&mut self, item: CartItem) -> bool {
        match self
            .items
            .iter_mut()
            .find(|i| i.object_id == item.object_id && i.source == item.source)
        {
            Some(existing) => {
                existing.purpose = item.purpose;
                false
            }
            None => {
                self.items.push(item);
                true
            }
        }
    }

    pub fn remove(&mut self, object_id: &str, source: &str) -> Option<CartItem> {
        let pos = self
            .items
            .iter()
            .position(|i| i.object_id == object_id && i.source == source)?;
        Some(self.items.remove(pos))
    }

    pub fn with_purpose(&self, purpose: CartPurpose) -> impl Iterator<Item = &CartItem> {
        self.items.iter().filter(move |i| i.purpose == purpose)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// `cart.json` beside the collections.
pub fn cart_path(db_path: &Path) -> PathBuf {
    db_path.join("cart.json")
}

pub fn load_cart(path: &Path) -> std::io::Result<Cart> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map_err(std::io::Error::other),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Cart::default()),
        Err(e) => Err(e),
    }
}

/// Write-then-rename so a crash never leaves a half-written cart.
pub fn save_cart(path: &Path, cart: &Cart) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(cart).map_err(std::io::Error::other)?;
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)
}
