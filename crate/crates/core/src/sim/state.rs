use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::ValidatedNetwork;

/// FNV-1a over the label bytes; used as the ChaCha stream id of a purpose.
pub fn stream_id(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator for one purpose (`"service"`, `"arrival/3"`, ...) derived from
/// the run seed.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(label));
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Lowest buffer index, then lowest activity index, then FIFO.
    #[default]
    Lowest,
    /// Uniform among tied buffers and among eligible activities.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: u64,
    pub buffer: usize,
    /// Starts at 1, plus one per routing.
    pub counter: u32,
    /// Pre-drawn buffers, position `c - 1` for counter `c`. A path shorter
    /// than the pre-draw depth means the job leaves after its last entry.
    /// Empty when the run does not pre-draw routes.
    pub path: Vec<usize>,
    pub arrival_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobType {
    /// Counter beyond the pre-draw depth.
    Routed,
    /// On a pre-drawn path of full depth.
    FullPath,
    /// On a pre-drawn path that ends before the depth.
    ShortPath,
}

impl Job {
    pub fn job_type(&self, depth: usize) -> JobType {
        if self.counter as usize > depth {
            JobType::Routed
        } else if self.path.len() == depth {
            JobType::FullPath
        } else {
            JobType::ShortPath
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InService {
    pub job: usize,
    /// Service requirement drawn when service started.
    pub drawn: f64,
    pub start: f64,
    pub end: f64,
}

/// Which waiting job of a buffer to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    SmallestCounter,
    LargestCounter,
}

/// A job entering service.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub activity: usize,
    pub job_id: u64,
    pub counter: u32,
    pub drawn: f64,
    pub end: f64,
}

pub(crate) struct Streams {
    pub arrivals: Vec<ChaCha8Rng>,
    pub service: ChaCha8Rng,
    pub routing: ChaCha8Rng,
    pub predraw: ChaCha8Rng,
    pub policy: ChaCha8Rng,
    pub tiebreak: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64, buffers: usize) -> Self {
        Streams {
            arrivals: (0..buffers).map(|i| stream(seed, &format!("arrival/{i}"))).collect(),
            service: stream(seed, "service"),
            routing: stream(seed, "routing"),
            predraw: stream(seed, "predraw"),
            policy: stream(seed, "policy"),
            tiebreak: stream(seed, "tiebreak"),
        }
    }
}

/// Dynamic network state: waiting jobs by (buffer, counter), in-service
/// records, component timers and the random streams driving the run.
pub struct SimState {
    pub(crate) t: f64,
    jobs: Vec<Option<Job>>,
    free: Vec<usize>,
    next_id: u64,
    queues: Vec<BTreeMap<u32, VecDeque<usize>>>,
    waiting: Vec<u64>,
    service: Vec<Option<InService>>,
    holder: Vec<Option<usize>>,
    betas: Vec<f64>,
    timer_set: Vec<f64>,
    depth: usize,
    pub(crate) tiebreak: TieBreak,
    pub(crate) streams: Streams,
}

impl SimState {
    /// Empty state at time 0.
    pub fn new(net: &ValidatedNetwork, depth: usize, seed: u64, tiebreak: TieBreak) -> Self {
        let n = net.num_buffers();
        SimState {
            t: 0.0,
            jobs: Vec::new(),
            free: Vec::new(),
            next_id: 0,
            queues: vec![BTreeMap::new(); n],
            waiting: vec![0; n],
            service: vec![None; net.num_activities()],
            holder: vec![None; net.num_processors()],
            betas: net.spec().activities.iter().map(|a| a.beta).collect(),
            timer_set: vec![f64::NEG_INFINITY; net.components().len()],
            depth,
            tiebreak,
            streams: Streams::new(seed, n),
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    /// Route pre-draw depth `D` (0 for the plain process).
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn job(&self, key: usize) -> &Job {
        self.jobs[key].as_ref().expect("live job")
    }

    /// `Q_i`: jobs waiting in buffer `i`, excluding those in service.
    pub fn waiting_len(&self, i: usize) -> u64 {
        self.waiting[i]
    }

    pub fn total_waiting(&self) -> u64 {
        self.waiting.iter().sum()
    }

    /// `Q_{i,c}`.
    pub fn waiting_with_counter(&self, i: usize, c: u32) -> u64 {
        self.queues[i].get(&c).map_or(0, |q| q.len() as u64)
    }

    /// Queue length of buffer `i` recounted from the per-counter queues.
    pub fn recount_waiting(&self, i: usize) -> u64 {
        self.queues[i].values().map(|q| q.len() as u64).sum()
    }

    pub fn min_counter(&self, i: usize) -> Option<u32> {
        self.queues[i].keys().next().copied()
    }

    pub fn max_counter(&self, i: usize) -> Option<u32> {
        self.queues[i].keys().next_back().copied()
    }

    /// Waiting jobs of buffer `i` in (counter, FIFO) order.
    pub fn waiting_jobs(&self, i: usize) -> impl Iterator<Item = &Job> + '_ {
        self.queues[i].values().flatten().map(move |&k| self.job(k))
    }

    pub fn in_service(&self, j: usize) -> Option<&InService> {
        self.service[j].as_ref()
    }

    /// In-service jobs as (activity, job, remaining requirement `V^j(t)`).
    pub fn serving(&self) -> impl Iterator<Item = (usize, &Job, f64)> + '_ {
        self.service.iter().enumerate().filter_map(move |(j, s)| {
            s.as_ref().map(|s| (j, self.job(s.job), self.remaining_of(j, s)))
        })
    }

    fn remaining_of(&self, j: usize, s: &InService) -> f64 {
        (self.betas[j] * (s.end - self.t)).max(0.0)
    }

    /// `V^j(t)`, zero when idle.
    pub fn remaining(&self, j: usize) -> f64 {
        self.service[j].as_ref().map_or(0.0, |s| self.remaining_of(j, s))
    }

    pub fn processor_free(&self, k: usize) -> bool {
        self.holder[k].is_none()
    }

    pub fn processor_holder(&self, k: usize) -> Option<usize> {
        self.holder[k]
    }

    /// `|X(t)|`: waiting jobs plus remaining in-service requirement.
    pub fn norm(&self) -> f64 {
        let v: f64 = (0..self.service.len()).map(|j| self.remaining(j)).sum();
        self.total_waiting() as f64 + v
    }

    /// Timer of component `h`: `max(0, 1 - (t - t_set))`.
    pub fn timer(&self, h: usize) -> f64 {
        (1.0 - (self.t - self.timer_set[h])).clamp(0.0, 1.0)
    }

    pub fn set_timer(&mut self, h: usize) {
        self.timer_set[h] = self.t;
    }

    /// Draws a pre-drawn route of up to `depth` buffers starting with
    /// `buffer`, whose first `counter` entries are `buffer` itself.
    fn predraw(&mut self, net: &ValidatedNetwork, buffer: usize, counter: u32) -> Vec<usize> {
        let c = counter as usize;
        if self.depth == 0 || c > self.depth {
            return Vec::new();
        }
        let mut path = vec![buffer; c];
        while path.len() < self.depth {
            match sample_next(net, *path.last().unwrap(), &mut self.streams.predraw) {
                Some(l) => path.push(l),
                None => break,
            }
        }
        path
    }

    /// Adds a waiting job; draws its route prefix when pre-drawing. Returns
    /// the job key.
    pub fn add_job(&mut self, net: &ValidatedNetwork, buffer: usize, counter: u32) -> usize {
        assert!(counter >= 1, "counters start at 1");
        let path = self.predraw(net, buffer, counter);
        self.insert(buffer, counter, path)
    }

    /// Adds a waiting job with an explicit pre-drawn path.
    pub fn add_job_with_path(&mut self, buffer: usize, counter: u32, path: Vec<usize>) -> usize {
        assert!(counter >= 1, "counters start at 1");
        self.insert(buffer, counter, path)
    }

    fn insert(&mut self, buffer: usize, counter: u32, path: Vec<usize>) -> usize {
        let job = Job { id: self.next_id, buffer, counter, path, arrival_time: self.t };
        self.next_id += 1;
        let key = match self.free.pop() {
            Some(k) => {
                self.jobs[k] = Some(job);
                k
            }
            None => {
                self.jobs.push(Some(job));
                self.jobs.len() - 1
            }
        };
        self.enqueue(key);
        key
    }

    fn enqueue(&mut self, key: usize) {
        let (buffer, counter) = {
            let j = self.job(key);
            (j.buffer, j.counter)
        };
        self.queues[buffer].entry(counter).or_default().push_back(key);
        self.waiting[buffer] += 1;
    }

    fn dequeue(&mut self, i: usize, pick: Pick) -> usize {
        let mut entry = match pick {
            Pick::SmallestCounter => self.queues[i].first_entry(),
            Pick::LargestCounter => self.queues[i].last_entry(),
        }
        .expect("buffer has waiting jobs");
        let key = entry.get_mut().pop_front().expect("non-empty queue");
        if entry.get().is_empty() {
            entry.remove();
        }
        self.waiting[i] -= 1;
        key
    }

    /// Starts a waiting job of the activity's buffer on activity `j`,
    /// drawing its service requirement from the buffer's law.
    pub fn start(&mut self, net: &ValidatedNetwork, j: usize, pick: Pick) -> Assignment {
        let gamma = net.spec().buffers[net.activity(j).buffer].service.sample(&mut self.streams.service);
        self.start_with(net, j, pick, gamma)
    }

    /// As [`SimState::start`] with a given service requirement.
    pub fn start_with(&mut self, net: &ValidatedNetwork, j: usize, pick: Pick, drawn: f64) -> Assignment {
        let act = net.activity(j);
        assert!(self.service[j].is_none(), "activity {j} is busy");
        assert!(
            act.processors.iter().all(|&k| self.holder[k].is_none()),
            "activity {j} needs a busy processor"
        );
        let key = self.dequeue(act.buffer, pick);
        for &k in &act.processors {
            self.holder[k] = Some(j);
        }
        let end = self.t + drawn / act.beta;
        self.service[j] = Some(InService { job: key, drawn, start: self.t, end });
        let job = self.job(key);
        Assignment { activity: j, job_id: job.id, counter: job.counter, drawn, end }
    }

    /// Ends service on activity `j` and routes the job: along its pre-drawn
    /// path while one is left, otherwise by sampling the routing matrix.
    /// Returns the job's new buffer, or `None` if it left the network.
    pub fn complete(&mut self, net: &ValidatedNetwork, j: usize) -> Option<usize> {
        let rec = self.service[j].take().expect("activity is busy");
        for &k in &net.activity(j).processors {
            self.holder[k] = None;
        }
        let key = rec.job;
        let next = {
            let depth = self.depth;
            let job = self.jobs[key].as_ref().expect("live job");
            let c = job.counter as usize;
            if c < job.path.len() {
                Some(job.path[c])
            } else if depth > 0 && c <= depth && job.path.len() < depth {
                None
            } else {
                let from = job.buffer;
                sample_next(net, from, &mut self.streams.routing)
            }
        };
        match next {
            Some(l) => {
                let job = self.jobs[key].as_mut().expect("live job");
                job.buffer = l;
                job.counter += 1;
                self.enqueue(key);
            }
            None => {
                self.jobs[key] = None;
                self.free.push(key);
            }
        }
        next
    }

    pub(crate) fn policy_coin(&mut self, epsilon: f64) -> bool {
        if epsilon <= 0.0 {
            false
        } else if epsilon >= 1.0 {
            true
        } else {
            self.streams.policy.random::<f64>() < epsilon
        }
    }

    /// Index into `0..n` among tied candidates: 0 under the lowest-index
    /// rule, uniform otherwise.
    pub(crate) fn tie(&mut self, n: usize) -> usize {
        match self.tiebreak {
            TieBreak::Lowest => 0,
            TieBreak::Random if n > 1 => self.streams.tiebreak.random_range(0..n),
            TieBreak::Random => 0,
        }
    }

    pub(crate) fn arrival_rng(&mut self, i: usize) -> &mut ChaCha8Rng {
        &mut self.streams.arrivals[i]
    }

    pub fn live_jobs(&self) -> usize {
        self.jobs.len() - self.free.len()
    }
}

/// Next buffer after `from` drawn from row `from` of the routing matrix;
/// `None` means the job leaves.
pub fn sample_next<R: Rng + ?Sized>(net: &ValidatedNetwork, from: usize, rng: &mut R) -> Option<usize> {
    let row = &net.routing()[from];
    if row.iter().all(|&p| p == 0.0) {
        return None;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (l, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return Some(l);
        }
    }
    None
}
