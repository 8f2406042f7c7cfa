//! Attack-pattern catalog: the component registry, regularly expressed
//! attack patterns with their STRIDE categories and attack paths, and the
//! six security-pattern groups that recommendations are drawn from.
//!
//! All catalog types are immutable after construction; loading is
//! single-threaded and any number of readers may share a loaded catalog.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Errors from registry and catalog loading.
#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("line {line}: expected `name,id`, got {got:?}")]
    RegistryFieldCount { line: usize, got: String },
    #[error("line {line}: component id {got:?} is not a positive integer")]
    RegistryBadId { line: usize, got: String },
    #[error("line {line}: duplicate component name {name:?}")]
    RegistryDuplicateName { line: usize, name: String },
    #[error("line {line}: duplicate component id {id}")]
    RegistryDuplicateId { line: usize, id: u32 },
    #[error("line {line}: empty component name")]
    RegistryEmptyName { line: usize },
    #[error("pattern expression at position {pos}: {reason}")]
    Pattern { pos: usize, reason: String },
    #[error("line {line}: {reason}")]
    Record { line: usize, reason: String },
    #[error("attack pattern {attack_id}: component {component:?} not in registry")]
    UnresolvedComponent { attack_id: u32, component: String },
    #[error("duplicate attack pattern id {attack_id}")]
    DuplicateAttackId { attack_id: u32 },
    #[error("attack pattern {attack_id}: path component {component:?} does not appear in its expression")]
    PathNotInExpr { attack_id: u32, component: String },
    #[error("catalog must define exactly 6 groups, found {found}")]
    GroupCount { found: usize },
    #[error("group id must be in 1..=6, got {got}")]
    GroupIdRange { got: i64 },
    #[error("duplicate group id {group_id}")]
    DuplicateGroup { group_id: u8 },
    #[error("group {group_id}: duplicate member {name:?} from {from}")]
    DuplicateMember {
        group_id: u8,
        name: String,
        from: PatternSource,
    },
}

/// Parse failure for the `(Component+)` pattern notation, with the byte
/// position of the offending character.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("position {pos}: {reason}")]
pub struct PatternParseError {
    pub pos: usize,
    pub reason: String,
}

/// `One` for a bare component term, `OneOrMore` for a `+` suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    One,
    OneOrMore,
}

/// One step of a regularly expressed attack pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternStep {
    pub component: String,
    pub quantifier: Quantifier,
}

/// A regularly expressed attack pattern: an ordered, non-empty sequence of
/// parenthesized component terms, e.g. `(User+)(Server+)(Log+)(HardDrive+)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackPatternExpr {
    steps: Vec<PatternStep>,
}

impl AttackPatternExpr {
    pub fn steps(&self) -> &[PatternStep] {
        &self.steps
    }

    pub fn contains_component(&self, name: &str) -> bool {
        self.steps.iter().any(|s| s.component == name)
    }

    /// Canonical rendering: `(Name+)` or `(Name)` per step, no separators.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push('(');
            out.push_str(&step.component);
            if step.quantifier == Quantifier::OneOrMore {
                out.push('+');
            }
            out.push(')');
        }
        out
    }
}

impl fmt::Display for AttackPatternExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Parse the `(Component+)(Component)...` notation.
///
/// Whitespace between terms is tolerated; anything else outside parentheses
/// is rejected with its position.
pub fn parse_pattern(text: &str) -> Result<AttackPatternExpr, PatternParseError> {
    let mut steps = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c != '(' {
            return Err(PatternParseError {
                pos: i,
                reason: format!("expected `(`, found {c:?}"),
            });
        }
        let start = i + 1;
        let mut j = start;
        while j < bytes.len() && bytes[j] as char != ')' {
            if bytes[j] as char == '(' {
                return Err(PatternParseError {
                    pos: j,
                    reason: "nested `(` inside component term".into(),
                });
            }
            j += 1;
        }
        if j == bytes.len() {
            return Err(PatternParseError {
                pos: i,
                reason: "unbalanced `(`: no closing `)`".into(),
            });
        }
        let term = &text[start..j];
        let (name, quantifier) = match term.strip_suffix('+') {
            Some(name) => (name, Quantifier::OneOrMore),
            None => (term, Quantifier::One),
        };
        if name.is_empty() {
            return Err(PatternParseError {
                pos: start,
                reason: "empty component name".into(),
            });
        }
        if name.contains('+') {
            return Err(PatternParseError {
                pos: start + name.find('+').unwrap(),
                reason: "`+` only allowed as a suffix".into(),
            });
        }
        if name.chars().any(char::is_whitespace) {
            return Err(PatternParseError {
                pos: start,
                reason: format!("component name {name:?} contains whitespace"),
            });
        }
        steps.push(PatternStep {
            component: name.to_string(),
            quantifier,
        });
        i = j + 1;
    }
    if steps.is_empty() {
        return Err(PatternParseError {
            pos: 0,
            reason: "empty pattern".into(),
        });
    }
    Ok(AttackPatternExpr { steps })
}

/// The six STRIDE threat categories. Group IDs follow the canonical STRIDE
/// listing order: S=1, T=2, R=3, I=4, D=5, E=6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrideCategory {
    Spoofing,
    Tampering,
    Repudiation,
    InformationDisclosure,
    DenialOfService,
    ElevationOfPrivilege,
}

impl StrideCategory {
    pub const ALL: [StrideCategory; 6] = [
        StrideCategory::Spoofing,
        StrideCategory::Tampering,
        StrideCategory::Repudiation,
        StrideCategory::InformationDisclosure,
        StrideCategory::DenialOfService,
        StrideCategory::ElevationOfPrivilege,
    ];

    pub fn group_id(self) -> u8 {
        match self {
            StrideCategory::Spoofing => 1,
            StrideCategory::Tampering => 2,
            StrideCategory::Repudiation => 3,
            StrideCategory::InformationDisclosure => 4,
            StrideCategory::DenialOfService => 5,
            StrideCategory::ElevationOfPrivilege => 6,
        }
    }

    pub fn from_group_id(id: u8) -> Option<StrideCategory> {
        StrideCategory::ALL.get(id.checked_sub(1)? as usize).copied()
    }

    pub fn letter(self) -> char {
        match self {
            StrideCategory::Spoofing => 'S',
            StrideCategory::Tampering => 'T',
            StrideCategory::Repudiation => 'R',
            StrideCategory::InformationDisclosure => 'I',
            StrideCategory::DenialOfService => 'D',
            StrideCategory::ElevationOfPrivilege => 'E',
        }
    }

    pub fn from_letter(c: char) -> Option<StrideCategory> {
        StrideCategory::ALL.into_iter().find(|cat| cat.letter() == c)
    }

    pub fn name(self) -> &'static str {
        match self {
            StrideCategory::Spoofing => "Spoofing",
            StrideCategory::Tampering => "Tampering",
            StrideCategory::Repudiation => "Repudiation",
            StrideCategory::InformationDisclosure => "Information Disclosure",
            StrideCategory::DenialOfService => "Denial of Service",
            StrideCategory::ElevationOfPrivilege => "Elevation of Privilege",
        }
    }
}

impl fmt::Display for StrideCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which of confidentiality, integrity or availability the attack violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackType {
    Availability,
    Integrity,
    Confidentiality,
}

impl AttackType {
    /// Encoded feature value: Availability=1, Integrity=2, Confidentiality=3.
    pub fn value(self) -> f64 {
        match self {
            AttackType::Availability => 1.0,
            AttackType::Integrity => 2.0,
            AttackType::Confidentiality => 3.0,
        }
    }

    pub fn letter(self) -> char {
        match self {
            AttackType::Availability => 'A',
            AttackType::Integrity => 'I',
            AttackType::Confidentiality => 'C',
        }
    }

    pub fn from_letter(c: char) -> Option<AttackType> {
        match c {
            'A' => Some(AttackType::Availability),
            'I' => Some(AttackType::Integrity),
            'C' => Some(AttackType::Confidentiality),
            _ => None,
        }
    }
}

/// Stable name-to-ID map for attack components.
#[derive(Debug, Clone, Default)]
pub struct ComponentRegistry {
    entries: Vec<(String, u32)>,
    by_name: HashMap<String, u32>,
}

impl ComponentRegistry {
    pub fn lookup(&self, name: &str) -> Option<u32> {
        self.by_name.get(name).copied()
    }

    pub fn entries(&self) -> &[(String, u32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Load a registry from `name,id` lines. `#`-prefixed lines are comments,
/// blank lines are skipped. Names and IDs must be unique.
pub fn load_registry(source: &str) -> Result<ComponentRegistry, CatalogError> {
    let mut registry = ComponentRegistry::default();
    let mut seen_ids = HashSet::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, id_text) = line.split_once(',').ok_or(CatalogError::RegistryFieldCount {
            line: line_no,
            got: line.to_string(),
        })?;
        let name = name.trim();
        let id_text = id_text.trim();
        if name.is_empty() {
            return Err(CatalogError::RegistryEmptyName { line: line_no });
        }
        if id_text.is_empty() {
            return Err(CatalogError::RegistryFieldCount {
                line: line_no,
                got: line.to_string(),
            });
        }
        let id: u32 = id_text.parse().ok().filter(|&v| v > 0).ok_or_else(|| {
            CatalogError::RegistryBadId {
                line: line_no,
                got: id_text.to_string(),
            }
        })?;
        if registry.by_name.contains_key(name) {
            return Err(CatalogError::RegistryDuplicateName {
                line: line_no,
                name: name.to_string(),
            });
        }
        if !seen_ids.insert(id) {
            return Err(CatalogError::RegistryDuplicateId { line: line_no, id });
        }
        registry.by_name.insert(name.to_string(), id);
        registry.entries.push((name.to_string(), id));
    }
    Ok(registry)
}

/// One attack path of a pattern: the attacked resource, the component used
/// to reach it, and the security property the attack violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackPath {
    pub resource: String,
    pub vector: String,
    pub attack_type: AttackType,
}

/// A catalog record for one regularly expressed attack pattern.
#[derive(Debug, Clone)]
pub struct AttackPatternRecord {
    pub attack_id: u32,
    pub expr: AttackPatternExpr,
    /// Non-empty, unique, ordered by group ID.
    pub categories: Vec<StrideCategory>,
    /// Non-empty; resource and vector of each path appear in `expr`.
    pub paths: Vec<AttackPath>,
}

/// Origin catalog of a security pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternSource {
    Steel2005,
    Blakley2004,
    KienzleElder2003,
}

impl PatternSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternSource::Steel2005 => "Steel2005",
            PatternSource::Blakley2004 => "Blakley2004",
            PatternSource::KienzleElder2003 => "KienzleElder2003",
        }
    }

    pub fn parse(text: &str) -> Option<PatternSource> {
        match text {
            "Steel2005" => Some(PatternSource::Steel2005),
            "Blakley2004" => Some(PatternSource::Blakley2004),
            "KienzleElder2003" => Some(PatternSource::KienzleElder2003),
            _ => None,
        }
    }
}

impl fmt::Display for PatternSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named security pattern plus where it was published.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupMember {
    pub pattern_name: String,
    pub source: PatternSource,
}

/// One of the six STRIDE-aligned groups of security patterns.
#[derive(Debug, Clone)]
pub struct SecurityPatternGroup {
    pub group_id: u8,
    pub category: StrideCategory,
    pub members: Vec<GroupMember>,
}

/// The full catalog: attack patterns, the six groups, and the registry that
/// resolves component names.
#[derive(Debug, Clone)]
pub struct Catalog {
    patterns: Vec<AttackPatternRecord>,
    groups: Vec<SecurityPatternGroup>,
    registry: ComponentRegistry,
}

impl Catalog {
    pub fn patterns(&self) -> &[AttackPatternRecord] {
        &self.patterns
    }

    /// The six groups, ordered by group ID.
    pub fn groups(&self) -> &[SecurityPatternGroup] {
        &self.groups
    }

    pub fn registry(&self) -> &ComponentRegistry {
        &self.registry
    }

    /// Number of (pattern, category) assignments per STRIDE category,
    /// indexed by `group_id - 1`. Multi-category patterns count once per
    /// category.
    pub fn stride_histogram(&self) -> [usize; 6] {
        let mut counts = [0usize; 6];
        for pattern in &self.patterns {
            for category in &pattern.categories {
                counts[(category.group_id() - 1) as usize] += 1;
            }
        }
        counts
    }

    /// The member list of one group, in loaded order.
    pub fn group_members(&self, group_id: u8) -> Result<&[GroupMember], CatalogError> {
        if !(1..=6).contains(&group_id) {
            return Err(CatalogError::GroupIdRange {
                got: group_id as i64,
            });
        }
        Ok(&self.groups[(group_id - 1) as usize].members)
    }
}

/// `stride_histogram` as a free function, matching the other operations.
pub fn stride_histogram(catalog: &Catalog) -> [usize; 6] {
    catalog.stride_histogram()
}

/// `group_members` as a free function.
pub fn group_members(catalog: &Catalog, group_id: u8) -> Result<&[GroupMember], CatalogError> {
    catalog.group_members(group_id)
}

#[derive(Default)]
struct PatternDraft {
    line: usize,
    attack_id: u32,
    expr: Option<AttackPatternExpr>,
    categories: Vec<StrideCategory>,
    paths: Vec<AttackPath>,
}

struct GroupDraft {
    group_id: u8,
    members: Vec<GroupMember>,
}

/// Load a catalog from its line-oriented record format.
///
/// Pattern blocks start with `pattern: <id>` and carry `regex:`, `stride:`
/// and one or more `path: <resource>,<vector>,<A|I|C>` lines. Group blocks
/// start with `group: <1..6>` and carry `member: <name>,<source>` lines.
/// `#`-prefixed lines are comments.
pub fn load_catalog(source: &str, registry: ComponentRegistry) -> Result<Catalog, CatalogError> {
    enum Block {
        None,
        Pattern(PatternDraft),
        Group(GroupDraft),
    }

    let mut patterns: Vec<AttackPatternRecord> = Vec::new();
    let mut groups: Vec<GroupDraft> = Vec::new();
    let mut block = Block::None;

    let record_err = |line: usize, reason: String| CatalogError::Record { line, reason };

    let finish = |block: &mut Block,
                      patterns: &mut Vec<AttackPatternRecord>,
                      groups: &mut Vec<GroupDraft>|
     -> Result<(), CatalogError> {
        match std::mem::replace(block, Block::None) {
            Block::None => Ok(()),
            Block::Pattern(draft) => {
                let expr = draft.expr.ok_or_else(|| {
                    record_err(draft.line, format!("pattern {} has no regex", draft.attack_id))
                })?;
                if draft.categories.is_empty() {
                    return Err(record_err(
                        draft.line,
                        format!("pattern {} has no stride categories", draft.attack_id),
                    ));
                }
                if draft.paths.is_empty() {
                    return Err(record_err(
                        draft.line,
                        format!("pattern {} has no paths", draft.attack_id),
                    ));
                }
                patterns.push(AttackPatternRecord {
                    attack_id: draft.attack_id,
                    expr,
                    categories: draft.categories,
                    paths: draft.paths,
                });
                Ok(())
            }
            Block::Group(draft) => {
                groups.push(draft);
                Ok(())
            }
        }
    };

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| record_err(line_no, format!("expected `key: value`, got {line:?}")))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "pattern" => {
                finish(&mut block, &mut patterns, &mut groups)?;
                let attack_id: u32 = value.parse().ok().filter(|&v| v > 0).ok_or_else(|| {
                    record_err(line_no, format!("attack id {value:?} is not a positive integer"))
                })?;
                block = Block::Pattern(PatternDraft {
                    line: line_no,
                    attack_id,
                    ..PatternDraft::default()
                });
            }
            "group" => {
                finish(&mut block, &mut patterns, &mut groups)?;
                let group_id: i64 = value
                    .parse()
                    .map_err(|_| record_err(line_no, format!("group id {value:?} is not an integer")))?;
                if !(1..=6).contains(&group_id) {
                    return Err(CatalogError::GroupIdRange { got: group_id });
                }
                block = Block::Group(GroupDraft {
                    group_id: group_id as u8,
                    members: Vec::new(),
                });
            }
            "regex" => match &mut block {
                Block::Pattern(draft) => {
                    if draft.expr.is_some() {
                        return Err(record_err(line_no, "duplicate regex line".into()));
                    }
                    let expr = parse_pattern(value).map_err(|e| CatalogError::Pattern {
                        pos: e.pos,
                        reason: e.reason,
                    })?;
                    draft.expr = Some(expr);
                }
                _ => return Err(record_err(line_no, "regex outside a pattern block".into())),
            },
            "stride" => match &mut block {
                Block::Pattern(draft) => {
                    if !draft.categories.is_empty() {
                        return Err(record_err(line_no, "duplicate stride line".into()));
                    }
                    let mut seen = HashSet::new();
                    for c in value.chars().filter(|c| !c.is_whitespace() && *c != ',') {
                        let category = StrideCategory::from_letter(c).ok_or_else(|| {
                            record_err(line_no, format!("unknown STRIDE letter {c:?}"))
                        })?;
                        if !seen.insert(category) {
                            return Err(record_err(
                                line_no,
                                format!("duplicate STRIDE letter {c:?}"),
                            ));
                        }
                        draft.categories.push(category);
                    }
                    draft.categories.sort();
                    if draft.categories.is_empty() {
                        return Err(record_err(line_no, "empty stride line".into()));
                    }
                }
                _ => return Err(record_err(line_no, "stride outside a pattern block".into())),
            },
            "path" => match &mut block {
                Block::Pattern(draft) => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 3 {
                        return Err(record_err(
                            line_no,
                            format!("expected `resource,vector,type`, got {value:?}"),
                        ));
                    }
                    let attack_type = parts[2]
                        .chars()
                        .next()
                        .filter(|_| parts[2].len() == 1)
                        .and_then(AttackType::from_letter)
                        .ok_or_else(|| {
                            record_err(line_no, format!("attack type must be A, I or C, got {:?}", parts[2]))
                        })?;
                    draft.paths.push(AttackPath {
                        resource: parts[0].to_string(),
                        vector: parts[1].to_string(),
                        attack_type,
                    });
                }
                _ => return Err(record_err(line_no, "path outside a pattern block".into())),
            },
            "member" => match &mut block {
                Block::Group(draft) => {
                    let (name, source) = value.split_once(',').ok_or_else(|| {
                        record_err(line_no, format!("expected `name,source`, got {value:?}"))
                    })?;
                    let name = name.trim();
                    let source = PatternSource::parse(source.trim()).ok_or_else(|| {
                        record_err(line_no, format!("unknown pattern source {:?}", source.trim()))
                    })?;
                    if name.is_empty() {
                        return Err(record_err(line_no, "empty member name".into()));
                    }
                    draft.members.push(GroupMember {
                        pattern_name: name.to_string(),
                        source,
                    });
                }
                _ => return Err(record_err(line_no, "member outside a group block".into())),
            },
            other => {
                return Err(record_err(line_no, format!("unknown key {other:?}")));
            }
        }
    }
    finish(&mut block, &mut patterns, &mut groups)?;

    // Cross-record validation.
    let mut ids = HashSet::new();
    for pattern in &patterns {
        if !ids.insert(pattern.attack_id) {
            return Err(CatalogError::DuplicateAttackId {
                attack_id: pattern.attack_id,
            });
        }
        for step in pattern.expr.steps() {
            if registry.lookup(&step.component).is_none() {
                return Err(CatalogError::UnresolvedComponent {
                    attack_id: pattern.attack_id,
                    component: step.component.clone(),
                });
            }
        }
        for path in &pattern.paths {
            for component in [&path.resource, &path.vector] {
                if !pattern.expr.contains_component(component) {
                    return Err(CatalogError::PathNotInExpr {
                        attack_id: pattern.attack_id,
                        component: component.clone(),
                    });
                }
            }
        }
    }

    if groups.len() != 6 {
        return Err(CatalogError::GroupCount { found: groups.len() });
    }
    let mut by_id: Vec<Option<SecurityPatternGroup>> = vec![None; 6];
    for draft in groups {
        let slot = &mut by_id[(draft.group_id - 1) as usize];
        if slot.is_some() {
            return Err(CatalogError::DuplicateGroup {
                group_id: draft.group_id,
            });
        }
        let mut seen = HashSet::new();
        for member in &draft.members {
            if !seen.insert((member.pattern_name.clone(), member.source)) {
                return Err(CatalogError::DuplicateMember {
                    group_id: draft.group_id,
                    name: member.pattern_name.clone(),
                    from: member.source,
                });
            }
        }
        *slot = Some(SecurityPatternGroup {
            group_id: draft.group_id,
            category: StrideCategory::from_group_id(draft.group_id).unwrap(),
            members: draft.members,
        });
    }
    let groups: Vec<SecurityPatternGroup> = by_id.into_iter().map(Option::unwrap).collect();

    Ok(Catalog {
        patterns,
        groups,
        registry,
    })
}
