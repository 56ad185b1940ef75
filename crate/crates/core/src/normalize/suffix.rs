//! Suffix array, LCP array and constant-time longest-common-extension queries.

/// Suffix array by prefix doubling. `O(n log^2 n)`.
pub fn suffix_array(text: &[u32]) -> Vec<usize> {
    let n = text.len();
    let mut sa: Vec<usize> = (0..n).collect();
    if n <= 1 {
        return sa;
    }
    let mut rank: Vec<usize> = text.iter().map(|&c| c as usize).collect();
    let mut tmp = vec![0usize; n];
    let mut k = 1;
    loop {
        let key = |i: usize| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        sa.sort_unstable_by_key(|&i| key(i));
        tmp[sa[0]] = 0;
        for w in 1..n {
            tmp[sa[w]] = tmp[sa[w - 1]] + usize::from(key(sa[w - 1]) != key(sa[w]));
        }
        std::mem::swap(&mut rank, &mut tmp);
        if rank[sa[n - 1]] == n - 1 {
            break;
        }
        k *= 2;
    }
    sa
}

/// Kasai's algorithm: `lcp[r]` is the common prefix of suffixes `sa[r-1]` and `sa[r]`.
pub fn lcp_array(text: &[u32], sa: &[usize]) -> Vec<usize> {
    let n = text.len();
    let mut rank = vec![0usize; n];
    for (r, &i) in sa.iter().enumerate() {
        rank[i] = r;
    }
    let mut lcp = vec![0usize; n];
    let mut h = 0usize;
    for i in 0..n {
        if rank[i] > 0 {
            let j = sa[rank[i] - 1];
            while i + h < n && j + h < n && text[i + h] == text[j + h] {
                h += 1;
            }
            lcp[rank[i]] = h;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    lcp
}

/// Longest common extension queries over one text.
pub struct Lce {
    rank: Vec<usize>,
    sparse: Vec<Vec<usize>>,
    len: usize,
}

impl Lce {
    pub fn new(text: &[u32]) -> Self {
        let sa = suffix_array(text);
        let lcp = lcp_array(text, &sa);
        let n = text.len();
        let mut rank = vec![0usize; n];
        for (r, &i) in sa.iter().enumerate() {
            rank[i] = r;
        }
        let mut sparse = vec![lcp];
        let mut width = 1;
        while 2 * width <= n {
            let prev = &sparse[sparse.len() - 1];
            let next: Vec<usize> = (0..=n - 2 * width).map(|i| prev[i].min(prev[i + width])).collect();
            sparse.push(next);
            width *= 2;
        }
        Lce { rank, sparse, len: n }
    }

    /// Length of the longest common prefix of the suffixes starting at `i` and `j`.
    pub fn query(&self, i: usize, j: usize) -> usize {
        if i == j {
            return self.len - i;
        }
        if i >= self.len || j >= self.len {
            return 0;
        }
        let (a, b) = {
            let (ra, rb) = (self.rank[i], self.rank[j]);
            if ra < rb {
                (ra + 1, rb)
            } else {
                (rb + 1, ra)
            }
        };
        let level = (usize::BITS - 1 - (b - a + 1).leading_zeros()) as usize;
        self.sparse[level][a].min(self.sparse[level][b + 1 - (1 << level)])
    }
}
