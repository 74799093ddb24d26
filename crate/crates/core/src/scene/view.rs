//! Observer contract between the scene graph and its backends.

use std::fmt;
use std::sync::{Arc, Mutex};

use crate::scene::{Asset, KeyValue, Property};

#[derive(Clone, Debug, PartialEq)]
pub enum SceneChange {
    AssetAdded(Asset),
    PropertySet { uid: String, property: Property, value: KeyValue },
    KeyframeInserted { uid: String, property: Property, frame: i32, value: KeyValue },
}

/// A backend that mirrors the scene graph. Every mutation made through
/// [`Scene`](crate::scene::Scene) is forwarded, in order, to each registered view.
pub trait View: Send {
    fn apply(&mut self, change: &SceneChange);
}

pub type SharedView = Arc<Mutex<dyn View>>;

/// Registered views. Not part of a scene's value: clones start with no
/// views and equality ignores them.
#[derive(Default)]
pub struct ViewRegistry(Vec<SharedView>);

impl ViewRegistry {
    pub fn register(&mut self, view: SharedView) {
        self.0.push(view);
    }

    pub fn notify(&self, change: &SceneChange) {
        for v in &self.0 {
            v.lock().expect("view lock poisoned").apply(change);
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Clone for ViewRegistry {
    fn clone(&self) -> Self {
        ViewRegistry::default()
    }
}

impl PartialEq for ViewRegistry {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Debug for ViewRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ViewRegistry({} views)", self.0.len())
    }
}
