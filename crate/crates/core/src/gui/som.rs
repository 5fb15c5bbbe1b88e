use alloc::collections::BTreeMap;
use alloc::format;

use super::{PixelBuffer, Rect, UiTree};

/// SoM index to node bounds.
pub type SomMap = BTreeMap<u32, Rect>;

const TAG_BG: [u8; 3] = [255, 200, 0];
const TAG_TEXT: [u8; 3] = [0, 0, 0];

/// Draws a numbered tag at the top-left corner of every interactable node.
pub fn annotate_som(tree: &UiTree, buf: &PixelBuffer) -> (PixelBuffer, SomMap) {
    let mut out = buf.clone();
    let mut map = SomMap::new();
    let screen = Rect::new(0, 0, out.width as i32, out.height as i32);
    for n in tree.interactables() {
        let Some(idx) = n.som_index else { continue };
        map.insert(idx, n.bounds);
        let digits = format!("{idx}");
        let tag = Rect::new(n.bounds.x, n.bounds.y, 8 * digits.len() as i32 + 4, 10);
        out.fill(tag, screen, TAG_BG);
        out.text(tag.x + 2, tag.y + 1, &digits, 1, tag, TAG_TEXT);
    }
    (out, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gui::{build_ui_tree, render, ScreenId};
    use crate::vehicle::VehicleState;

    #[test]
    fn map_is_bijective_onto_interactables() {
        let s = VehicleState::default();
        for screen in ScreenId::ALL {
            let t = build_ui_tree(&s, screen);
            let (img, map) = annotate_som(&t, &render(&t));
            let inter = t.interactables();
            assert_eq!(map.keys().copied().collect::<alloc::vec::Vec<_>>(), (1..=inter.len() as u32).collect::<alloc::vec::Vec<_>>());
            for n in inter {
                assert_eq!(map[&n.som_index.unwrap()], n.bounds);
                assert_eq!(img.pixel(n.bounds.x as u32, n.bounds.y as u32), [255, 200, 0, 255]);
            }
        }
    }
}
