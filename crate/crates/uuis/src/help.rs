//! Static help pages, one per UI page key.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HelpPage {
    pub key: &'static str,
    pub title: &'static str,
    /// Functions available on the page.
    pub functions: &'static [&'static str],
    pub guidance: &'static str,
}

pub const INDEX_KEY: &str = "index";

pub const PAGES: &[HelpPage] = &[
    HelpPage {
        key: "session",
        title: "Signing in",
        functions: &["Log in with username and password", "Choose the role to act in", "Log out"],
        guidance: "Usernames are eight characters starting with a letter. High-privileged accounts also submit a voice sample. Sessions end after the configured idle time.",
    },
    HelpPage {
        key: "assets",
        title: "Assets",
        functions: &["List assets", "Show or hide columns and change page size", "Add an asset", "Edit an asset", "Delete selected assets", "Assign assets to a person or location", "Borrow assets to a person"],
        guidance: "Barcodes are unique. Deleting only marks an asset unavailable. Scanned or pasted barcodes may be separated by new lines or commas.",
    },
    HelpPage {
        key: "licenses",
        title: "Licenses",
        functions: &["List licenses", "Add a license", "Edit a license", "Delete selected licenses", "Assign a license to an asset", "Borrow licenses to a person"],
        guidance: "A license can be attached to as many assets as it has seats.",
    },
    HelpPage {
        key: "locations",
        title: "Locations",
        functions: &["List locations", "Add a location", "Edit a location", "Delete selected locations", "Assign locations to a location, department or person", "Upload a floor plan"],
        guidance: "A location may not be placed inside one of its own sub-locations.",
    },
    HelpPage {
        key: "persons",
        title: "Persons",
        functions: &["List persons", "Add a person", "Edit a person", "Delete selected persons", "Enroll a voice sample", "Edit a person's roles and permissions", "Assign a role or permission to several persons"],
        guidance: "You can only create persons at or below your own level and within your scope.",
    },
    HelpPage {
        key: "faculties",
        title: "Faculties",
        functions: &["List faculties", "Add a faculty", "Edit a faculty"],
        guidance: "Only university-level staff add faculties.",
    },
    HelpPage {
        key: "departments",
        title: "Departments",
        functions: &["List departments", "Add a department to a faculty", "Edit a department"],
        guidance: "Faculty-level staff add departments to their own faculty.",
    },
    HelpPage {
        key: "groups",
        title: "Groups",
        functions: &["Group assets or locations under one master"],
        guidance: "Pick exactly one master and at least two other members.",
    },
    HelpPage {
        key: "types",
        title: "Types",
        functions: &["List types", "Create a type with its field set"],
        guidance: "Asset types must mark name and barcode as required; location types must mark location_number.",
    },
    HelpPage {
        key: "subgroups",
        title: "Subgroups",
        functions: &["List subgroups", "Create a subgroup from selected assets"],
        guidance: "An asset belongs to at most one subgroup; adding it to a new one moves it.",
    },
    HelpPage {
        key: "import",
        title: "Import",
        functions: &["Upload CSV or delimited text", "Map source columns to fields", "Download the problem file"],
        guidance: "Rows that cannot be stored are listed in the problem file with a reason. Fix them and import the file again.",
    },
    HelpPage {
        key: "requests",
        title: "Requests",
        functions: &["Submit acquisition, reparation, elimination or move requests", "Report a bug", "List requests you may decide", "Approve or reject a request"],
        guidance: "A request is decided by anyone at least one level above the requester. A rejection needs a reason.",
    },
    HelpPage {
        key: "search",
        title: "Search",
        functions: &["Basic search: one text matched in every field", "Advanced search: terms combined with AND, OR, NOT and parentheses, limited to chosen categories and fields"],
        guidance: "Matching ignores case. Operators are written in capitals; a query can't start or end with AND or OR.",
    },
    HelpPage {
        key: "reports",
        title: "Reports",
        functions: &["Compare location capacity with chairs, tables, PCs or students", "Download the report as CSV"],
        guidance: "PCs are compared for teaching labs and offices only, students for research labs only.",
    },
    HelpPage {
        key: "floorplan",
        title: "Floor plans",
        functions: &["Choose a location with a plan", "View rooms with their number, type, capacity and assignee", "Print"],
        guidance: "Annotations always reflect the current assignments.",
    },
    HelpPage {
        key: "audit",
        title: "Audit",
        functions: &["Sign in again to the audit pages", "Filter actions by period, person or item", "Export as CSV"],
        guidance: "Every action is recorded and can't be changed.",
    },
    HelpPage {
        key: "profile",
        title: "My profile",
        functions: &["See assets, licenses and locations assigned to you", "See items you borrowed", "See your roles and permissions"],
        guidance: "Contact an administrator to change what is assigned to you.",
    },
    HelpPage {
        key: "roles",
        title: "Roles and permissions",
        functions: &["List roles and permissions", "Add a role", "Add or rename a permission"],
        guidance: "A permission that is already granted can't be renamed.",
    },
    HelpPage {
        key: "outbox",
        title: "Notifications",
        functions: &["List queued and sent notifications", "Send a notice to a person"],
        guidance: "Borrowing and rejected requests notify the person concerned.",
    },
    HelpPage {
        key: "cocomo",
        title: "Cost estimate",
        functions: &["Estimate effort, schedule, staff and cost from size and cost drivers"],
        guidance: "Enter the size in thousands of lines and either the driver ratings or an adjustment factor.",
    },
];

pub const INDEX: HelpPage = HelpPage {
    key: INDEX_KEY,
    title: "Help index",
    functions: &[],
    guidance: "Choose a page to read its help.",
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HelpDocument {
    pub page: HelpPage,
    /// Keys of every page, filled for the index only.
    pub pages: Vec<&'static str>,
}

/// Help for `key`; unknown keys get the index.
pub fn help_content(key: &str) -> HelpDocument {
    match PAGES.iter().find(|p| p.key == key) {
        Some(p) => HelpDocument { page: p.clone(), pages: Vec::new() },
        None => HelpDocument { page: INDEX, pages: PAGES.iter().map(|p| p.key).collect() },
    }
}
