use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ActionPattern, Condition, Effect, PageSpec, Route, SimTask, Split, Transition, WorldSpec};
use crate::trajectory::{Action, ActionKind, Element, TemplateTable};

const TRAIN_FRACTION: f64 = 0.7;

struct Product {
    name: &'static str,
    slug: &'static str,
    keyword: &'static str,
    category: &'static str,
}

const CATEGORIES: [(&str, &str); 2] = [("kitchen", "Kitchen"), ("garden", "Garden")];

const PRODUCTS: [Product; 6] = [
    Product { name: "Blue Kettle", slug: "blue-kettle", keyword: "kettle", category: "kitchen" },
    Product { name: "Chef Knife", slug: "chef-knife", keyword: "knife", category: "kitchen" },
    Product { name: "Coffee Grinder", slug: "coffee-grinder", keyword: "grinder", category: "kitchen" },
    Product { name: "Garden Hose", slug: "garden-hose", keyword: "hose", category: "garden" },
    Product { name: "Rose Seeds", slug: "rose-seeds", keyword: "seeds", category: "garden" },
    Product { name: "Watering Can", slug: "watering-can", keyword: "watering", category: "garden" },
];

fn el(id: &str, tag: &str, text: impl Into<String>) -> Element {
    Element::new(id, tag, text)
}

fn on(kind: ActionKind, target: &str) -> ActionPattern {
    ActionPattern { kind, target: Some(target.to_string()), text: None, direction: None, app: None }
}

fn go(from: &str, target: &str, to: &str) -> Transition {
    Transition { from: from.into(), on: on(ActionKind::Click, target), to: Some(to.into()), effects: vec![] }
}

fn route(name: &str, actions: Vec<Action>, key_steps: Vec<usize>) -> Route {
    Route { name: name.into(), actions, key_steps }
}

fn cat_url(c: &str) -> String {
    format!("shop/c/{c}")
}

/// The shop world used by tests, examples and the default loop configuration.
///
/// Two categories of three products each, a search box with one results page
/// per product keyword, and a wishlist. Twenty tasks in four families:
/// wishlist additions and price questions (each solvable by browsing or by
/// searching), category visits (by link or by URL) and plain searches.
/// Prices and the train/test split depend on `seed`.
pub fn generate_fixture_suite(seed: u64) -> WorldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prices: BTreeMap<&str, u32> = PRODUCTS.iter().map(|p| (p.slug, rng.gen_range(5..100))).collect();

    let mut pages = BTreeMap::new();
    let mut transitions = Vec::new();
    let home_link = || el("home", "A", "Home");
    let wish_link = || el("nav-wishlist", "A", "My Wish List");

    let mut home = vec![el("search", "INPUT", "Search products")];
    for (slug, label) in CATEGORIES {
        home.push(el(&format!("nav-{slug}"), "A", label));
        transitions.push(go("home", &format!("nav-{slug}"), &format!("cat-{slug}")));
    }
    home.push(wish_link());
    transitions.push(go("home", "nav-wishlist", "wishlist"));
    pages.insert("home".to_string(), PageSpec { url: "shop/home".into(), elements: home });

    for (slug, _) in CATEGORIES {
        let page = format!("cat-{slug}");
        let mut elements = vec![home_link()];
        for p in PRODUCTS.iter().filter(|p| p.category == slug) {
            elements.push(el(&format!("p-{}", p.slug), "A", p.name));
            transitions.push(go(&page, &format!("p-{}", p.slug), &format!("product-{}", p.slug)));
        }
        transitions.push(go(&page, "home", "home"));
        pages.insert(page, PageSpec { url: cat_url(slug), elements });
    }

    for p in &PRODUCTS {
        let page = format!("product-{}", p.slug);
        let price = prices[p.slug];
        pages.insert(
            page.clone(),
            PageSpec {
                url: format!("shop/p/{}", p.slug),
                elements: vec![
                    home_link(),
                    el("title", "DIV", p.name),
                    el("price", "DIV", format!("Price: ${price}")),
                    el("add-wish", "A", "Add to Wish List"),
                    wish_link(),
                ],
            },
        );
        transitions.push(Transition {
            from: page.clone(),
            on: on(ActionKind::Click, "add-wish"),
            to: None,
            effects: vec![Effect::AddToWishlist { item: p.name.into() }],
        });
        transitions.push(go(&page, "home", "home"));
        transitions.push(go(&page, "nav-wishlist", "wishlist"));

        let results = format!("results-{}", p.keyword);
        pages.insert(
            results.clone(),
            PageSpec {
                url: format!("shop/search?q={}", p.keyword),
                elements: vec![
                    home_link(),
                    el(&format!("r-{}", p.slug), "A", p.name),
                    el(&format!("snippet-{}", p.slug), "DIV", format!("{} - ${price}", p.name)),
                    el(&format!("quick-add-{}", p.slug), "BUTTON", format!("Add {} to Wish List", p.name)),
                ],
            },
        );
        transitions.push(Transition {
            from: "home".into(),
            on: ActionPattern { text: Some(p.keyword.into()), ..on(ActionKind::Type, "search") },
            to: Some(results.clone()),
            effects: vec![Effect::SetQuery],
        });
        transitions.push(go(&results, &format!("r-{}", p.slug), &page));
        transitions.push(Transition {
            from: results.clone(),
            on: on(ActionKind::Click, &format!("quick-add-{}", p.slug)),
            to: None,
            effects: vec![Effect::AddToWishlist { item: p.name.into() }],
        });
        transitions.push(go(&results, "home", "home"));
    }
    // Any other query lands on an empty results page.
    transitions.push(Transition {
        from: "home".into(),
        on: on(ActionKind::Type, "search"),
        to: Some("results-none".into()),
        effects: vec![Effect::SetQuery],
    });
    pages.insert(
        "results-none".into(),
        PageSpec { url: "shop/search".into(), elements: vec![home_link(), el("empty", "DIV", "No results")] },
    );
    transitions.push(go("results-none", "home", "home"));
    pages.insert(
        "wishlist".into(),
        PageSpec { url: "shop/wishlist".into(), elements: vec![home_link(), el("heading", "DIV", "Your Wish List")] },
    );
    transitions.push(go("wishlist", "home", "home"));

    let mut families: Vec<Vec<SimTask>> = vec![Vec::new(); 4];
    for p in &PRODUCTS {
        let browse_to = vec![Action::click(format!("nav-{}", p.category)), Action::click(format!("p-{}", p.slug))];
        let search = Action::type_text("search", p.keyword);
        let mut wish_browse = browse_to.clone();
        wish_browse.extend([Action::click("add-wish"), Action::stop("")]);
        families[0].push(SimTask {
            task_id: format!("wish-{}", p.slug),
            goal: format!("Add the {} to my wish list", p.name),
            success: Condition::WishlistContains { item: p.name.into() },
            routes: vec![
                route("browse", wish_browse, vec![1, 2, 3]),
                route(
                    "search",
                    vec![search.clone(), Action::click(format!("quick-add-{}", p.slug)), Action::stop("")],
                    vec![0, 1, 2],
                ),
            ],
            split: Split::Train,
            ground_truth_key_steps: BTreeSet::new(),
        });
        let answer = format!("${}", prices[p.slug]);
        let mut price_browse = browse_to.clone();
        price_browse.push(Action::stop(answer.clone()));
        families[1].push(SimTask {
            task_id: format!("price-{}", p.slug),
            goal: format!("What is the price of the {}?", p.name),
            success: Condition::AnswerEquals { answer: answer.clone() },
            routes: vec![
                route("browse", price_browse, vec![1, 2]),
                route("search", vec![search.clone(), Action::stop(answer)], vec![0, 1]),
            ],
            split: Split::Train,
            ground_truth_key_steps: BTreeSet::new(),
        });
        families[3].push(SimTask {
            task_id: format!("search-{}", p.keyword),
            goal: format!("Search the shop for {}", p.keyword),
            success: Condition::QueryEquals { query: p.keyword.into() },
            routes: vec![route("search", vec![search, Action::stop("")], vec![0, 1])],
            split: Split::Train,
            ground_truth_key_steps: BTreeSet::new(),
        });
    }
    for (slug, label) in CATEGORIES {
        families[2].push(SimTask {
            task_id: format!("category-{slug}"),
            goal: format!("Open the {label} category"),
            success: Condition::OnPage { page: format!("cat-{slug}") },
            routes: vec![
                route("link", vec![Action::click(format!("nav-{slug}")), Action::stop("")], vec![0, 1]),
                route("url", vec![Action::Navigate { url: cat_url(slug) }, Action::stop("")], vec![0, 1]),
            ],
            split: Split::Train,
            ground_truth_key_steps: BTreeSet::new(),
        });
    }

    // Stratified split: per-family quotas by largest remainder, members
    // chosen by a seeded shuffle.
    let total: usize = families.iter().map(Vec::len).sum();
    let target = (total as f64 * TRAIN_FRACTION).round() as usize;
    let exact: Vec<f64> = families.iter().map(|f| f.len() as f64 * TRAIN_FRACTION).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..families.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(target.saturating_sub(quotas.iter().sum())) {
        quotas[i] += 1;
    }
    let mut tasks = Vec::with_capacity(total);
    for (family, quota) in families.iter_mut().zip(quotas) {
        let mut idx: Vec<usize> = (0..family.len()).collect();
        idx.shuffle(&mut rng);
        for (rank, &i) in idx.iter().enumerate() {
            family[i].split = if rank < quota { Split::Train } else { Split::Test };
        }
        tasks.append(family);
    }

    let mut world = WorldSpec {
        seed,
        app_name: "ShopLite".into(),
        start_page: "home".into(),
        pages,
        transitions,
        shortcuts: CATEGORIES.iter().map(|(c, _)| cat_url(c)).collect(),
        tasks: Vec::new(),
    };
    let table = TemplateTable::default();
    for t in &mut tasks {
        t.ground_truth_key_steps = super::annotate_key_steps(&world, t, &table);
    }
    world.tasks = tasks;
    world.check().expect("fixture world is well formed");
    world
}
