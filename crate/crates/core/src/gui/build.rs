use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::layout::{ListSource, WidgetSpec, HEADER, NAV_BAR};
use super::{Behavior, Layouts, Rect, Role, ScreenId, UiNode, UiTree, SCREEN_HEIGHT, SCREEN_WIDTH};
use crate::vehicle::{Value, VehicleState};

/// Builds the tree for `screen` using the bundled layouts, first list page.
pub fn build_ui_tree(state: &VehicleState, screen: ScreenId) -> UiTree {
    build_ui_tree_paged(&crate::assets::layouts(), state, screen, 0)
}

/// Builds the tree with every list on the screen showing page `page`
/// (clamped to the last page).
pub fn build_ui_tree_paged(layouts: &Layouts, state: &VehicleState, screen: ScreenId, page: u32) -> UiTree {
    let layout = layouts.screen(screen).expect("layouts are validated to contain every screen");
    let mut children = Vec::new();
    children.push(plain(
        "header",
        Role::Label,
        &layout.title,
        HEADER,
    ));
    for w in &layout.widgets {
        children.push(widget_node(w, state, page));
    }
    children.push(nav_bar(screen));

    let mut root = UiNode {
        som_index: None,
        id: format!("screen.{}", screen.name()),
        role: Role::Screen,
        label: layout.title.clone(),
        bounds: Rect::new(0, 0, SCREEN_WIDTH as i32, SCREEN_HEIGHT as i32),
        value: layout.binding.as_deref().and_then(|b| state.get(b)),
        binding: layout.binding.clone(),
        interactable: false,
        behavior: None,
        children,
    };
    number(&mut root, &mut 1);
    UiTree {
        screen,
        width: SCREEN_WIDTH,
        height: SCREEN_HEIGHT,
        brightness: state.system.screen_brightness,
        root,
    }
}

fn plain(id: &str, role: Role, label: &str, bounds: Rect) -> UiNode {
    UiNode {
        som_index: None,
        id: id.to_string(),
        role,
        label: label.to_string(),
        bounds,
        value: None,
        binding: None,
        interactable: false,
        behavior: None,
        children: Vec::new(),
    }
}

fn widget_node(w: &WidgetSpec, state: &VehicleState, page: u32) -> UiNode {
    let behavior = w.behavior();
    let value = match (w.role, &w.binding) {
        (Role::Button, _) | (_, None) => None,
        (_, Some(b)) => state.get(b),
    };
    let mut node = UiNode {
        som_index: None,
        id: w.id.clone(),
        role: w.role,
        label: w.label.clone(),
        bounds: w.bounds,
        value,
        binding: w.binding.clone(),
        interactable: w.role.is_interactable() && behavior.is_some(),
        behavior,
        children: Vec::new(),
    };
    if w.role == Role::List {
        let per_page = w.page_size.unwrap_or(1).max(1);
        let total = match w.source {
            Some(ListSource::Alerts) => state.safety.active_alerts.len() as u32,
            None => w.items.len() as u32,
        };
        let pages = total.div_ceil(per_page).max(1);
        let page = page.min(pages - 1);
        let rows = (page * per_page)..((page + 1) * per_page).min(total);
        for (row, i) in rows.enumerate() {
            let child = match w.source {
                Some(ListSource::Alerts) => {
                    let a = &state.safety.active_alerts[i as usize];
                    let mut n = plain(&format!("{}.{}", w.id, i), Role::Label, &a.kind, w.item_slot(row as u32));
                    n.value = Some(Value::Text(a.message.clone()));
                    n
                }
                None => widget_node(&w.items[i as usize], state, 0),
            };
            node.children.push(child);
        }
        node.behavior = Some(Behavior::Scroll { page, pages });
    }
    node
}

fn nav_bar(current: ScreenId) -> UiNode {
    let mut bar = plain("nav", Role::List, "Navigation", NAV_BAR);
    let w = NAV_BAR.w / ScreenId::ALL.len() as i32;
    for (i, screen) in ScreenId::ALL.into_iter().enumerate() {
        let mut b = plain(
            &format!("nav.{}", screen.name().to_ascii_lowercase()),
            Role::Button,
            screen.nav_label(),
            Rect::new(NAV_BAR.x + i as i32 * w, NAV_BAR.y, w, NAV_BAR.h),
        );
        b.value = (screen == current).then_some(Value::Bool(true));
        b.interactable = true;
        b.behavior = Some(Behavior::Navigate { screen });
        bar.children.push(b);
    }
    bar
}

fn number(node: &mut UiNode, next: &mut u32) {
    if node.interactable {
        node.som_index = Some(*next);
        *next += 1;
    }
    for c in &mut node.children {
        number(c, next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{ControlCommand, Value};

    #[test]
    fn tree_json_round_trip_keeps_null_values() {
        for screen in ScreenId::ALL {
            let t = build_ui_tree(&VehicleState::default(), screen);
            let back: UiTree = serde_json::from_str(&t.canonical_json()).unwrap();
            assert_eq!(back, t, "{}", screen.name());
        }
        let t = build_ui_tree(&VehicleState::default(), ScreenId::Maps);
        assert!(t.nodes().iter().any(|n| n.value == Some(Value::Null)));
    }

    #[test]
    fn hvac_has_front_defrost_toggle() {
        let t = build_ui_tree(&VehicleState::default(), ScreenId::HVAC);
        let n = t.nodes().into_iter().find(|n| n.label == "Front Defrost").unwrap();
        assert_eq!(n.role, Role::Toggle);
        assert_eq!(n.value, Some(Value::Bool(false)));
    }

    #[test]
    fn safety_center_title() {
        let s = crate::vehicle::apply_control(
            &VehicleState::default(),
            &ControlCommand::set("safety.notification_center_open", Value::Bool(true)),
        )
        .unwrap();
        let t = build_ui_tree(&s, ScreenId::SafetyCenter);
        assert_eq!(t.root.role, Role::Screen);
        assert_eq!(t.root.label, "Safety Notifications");
    }

    #[test]
    fn every_screen_has_full_nav_bar_and_contained_children() {
        let s = VehicleState::default();
        for screen in ScreenId::ALL {
            let t = build_ui_tree(&s, screen);
            assert_eq!(t, build_ui_tree(&s, screen));
            let navs = t.nodes().into_iter().filter(|n| matches!(n.behavior, Some(Behavior::Navigate { .. }))).count();
            assert_eq!(navs, 8);
            fn check(n: &UiNode) {
                for c in &n.children {
                    assert!(n.bounds.contains_rect(&c.bounds), "{} escapes {}", c.id, n.id);
                    check(c);
                }
            }
            check(&t.root);
        }
    }

    #[test]
    fn som_indices_are_preorder_over_interactables() {
        let t = build_ui_tree(&VehicleState::default(), ScreenId::Media);
        let idx: Vec<u32> = t.interactables().iter().map(|n| n.som_index.unwrap()).collect();
        assert_eq!(idx, (1..=idx.len() as u32).collect::<Vec<_>>());
        assert!(t.nodes().iter().filter(|n| !n.interactable).all(|n| n.som_index.is_none()));
    }

    #[test]
    fn alert_list_pages() {
        let mut s = VehicleState::default();
        for i in 0..6 {
            s = s.raise_alert("overspeed", &format!("alert {i}"));
        }
        let l = &crate::assets::layouts();
        let p0 = build_ui_tree_paged(l, &s, ScreenId::SafetyCenter, 0);
        let p1 = build_ui_tree_paged(l, &s, ScreenId::SafetyCenter, 1);
        let p9 = build_ui_tree_paged(l, &s, ScreenId::SafetyCenter, 9);
        let list = |t: &UiTree| t.by_id("safety.alerts").unwrap().clone();
        assert_eq!(list(&p0).children.len(), 4);
        assert_eq!(list(&p1).children.len(), 2);
        assert_eq!(list(&p9), list(&p1));
        assert_eq!(list(&p1).behavior, Some(Behavior::Scroll { page: 1, pages: 2 }));
    }
}
