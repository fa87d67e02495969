use std::ffi::{CStr, CString};
use std::ptr;

use jobshop_ffi::*;

const WORKED: &str = "2 3\n2 10 0 27 1 14\n1 20 2 12 0 12\n";

fn parse_worked() -> *mut JobshopInstance {
    let text = CString::new(WORKED).unwrap();
    let mut inst = ptr::null_mut();
    assert_eq!(
        unsafe { jobshop_instance_parse(text.as_ptr(), JobshopFormat::Standard, &mut inst) },
        JobshopStatus::Ok
    );
    assert!(!inst.is_null());
    inst
}

fn last_error() -> String {
    let p = jobshop_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn instance_queries() {
    let inst = parse_worked();
    let (mut n, mut m, mut lb) = (0, 0, 0);
    unsafe {
        assert_eq!(jobshop_instance_dims(inst, &mut n, &mut m), JobshopStatus::Ok);
        assert_eq!(jobshop_instance_lower_bound(inst, &mut lb), JobshopStatus::Ok);
        jobshop_instance_free(inst);
    }
    assert_eq!((n, m, lb), (2, 3, 51));
}

#[test]
fn parse_errors_carry_a_message() {
    let text = CString::new("2 3\n2 10 0 27\n").unwrap();
    let mut inst = ptr::null_mut();
    let st = unsafe { jobshop_instance_parse(text.as_ptr(), JobshopFormat::Standard, &mut inst) };
    assert_eq!(st, JobshopStatus::ParseError);
    assert!(inst.is_null());
    assert!(last_error().contains("line 2"));
    let st = unsafe { jobshop_instance_parse(ptr::null(), JobshopFormat::Standard, &mut inst) };
    assert_eq!(st, JobshopStatus::NullPointer);
    let bad = [0xffu8, 0];
    let st = unsafe { jobshop_instance_parse(bad.as_ptr().cast(), JobshopFormat::Standard, &mut inst) };
    assert_eq!(st, JobshopStatus::InvalidUtf8);
}

#[test]
fn dispatch_spt_on_worked_instance() {
    let inst = parse_worked();
    let mut ms = 0;
    let mut json = ptr::null_mut();
    unsafe {
        assert_eq!(jobshop_dispatch(inst, JobshopRule::Spt, 0, &mut ms, &mut json), JobshopStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        jobshop_string_free(json);
        assert!(text.contains("\"makespan\": 51"), "{text}");
        assert_eq!(jobshop_dispatch(inst, JobshopRule::Mwkr, 0, &mut ms, ptr::null_mut()), JobshopStatus::Ok);
        jobshop_instance_free(inst);
    }
    assert!(ms >= 51);
}

#[test]
fn env_episode_through_the_abi() {
    let inst = parse_worked();
    let mut env = ptr::null_mut();
    unsafe {
        assert_eq!(jobshop_env_new(inst, JobshopBudget::Auto, 0, &mut env), JobshopStatus::Ok);
        jobshop_instance_free(inst);
        let mut dim = 0;
        assert_eq!(jobshop_env_observation_dim(env, &mut dim), JobshopStatus::Ok);
        assert_eq!(dim, 3 * 3 + 2 * 2 + 2 * 3);
        let mut obs = vec![-1.0; dim];
        assert_eq!(jobshop_env_observation(env, obs.as_mut_ptr(), dim), JobshopStatus::Ok);
        assert!(obs.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(jobshop_env_observation(env, obs.as_mut_ptr(), dim - 1), JobshopStatus::BufferTooSmall);

        let mut mask = [false; 2];
        let mut total = 0.0;
        let mut steps = 0;
        let mut step = JobshopStep::default();
        loop {
            assert_eq!(jobshop_env_action_mask(env, mask.as_mut_ptr(), 2), JobshopStatus::Ok);
            let action = mask.iter().position(|&b| b).expect("eligible job at a decision point");
            assert_eq!(jobshop_env_step(env, action, &mut step), JobshopStatus::Ok);
            assert!(!step.invalid);
            total += step.reward;
            steps += 1;
            if step.done || step.truncated {
                break;
            }
        }
        assert!(step.done);
        assert_eq!(steps, 6);
        let mut ms = 0;
        assert_eq!(jobshop_env_makespan(env, &mut ms), JobshopStatus::Ok);
        assert!(ms >= 51);
        assert!(total > 6.0);
        assert_eq!(jobshop_env_step(env, 0, &mut step), JobshopStatus::EpisodeFinished);
        assert!(last_error().contains("reset"));

        let mut json = ptr::null_mut();
        assert_eq!(jobshop_env_schedule_json(env, &mut json), JobshopStatus::Ok);
        jobshop_string_free(json);

        assert_eq!(jobshop_env_reset(env), JobshopStatus::Ok);
        assert_eq!(jobshop_env_step(env, 7, &mut step), JobshopStatus::InvalidArgument);
        assert_eq!(jobshop_env_makespan(env, &mut ms), JobshopStatus::EnvError);
        jobshop_env_free(env);
    }
}

#[test]
fn invalid_arguments_and_null_handles() {
    let mut inst = ptr::null_mut();
    let mut env = ptr::null_mut();
    let (mut n, mut m) = (0, 0);
    unsafe {
        assert_eq!(jobshop_instance_random(3, 3, 5, 1, 0, &mut inst), JobshopStatus::InvalidArgument);
        assert_eq!(jobshop_instance_random(3, 3, 1, 9, 4, &mut inst), JobshopStatus::Ok);
        assert_eq!(jobshop_env_new(inst, JobshopBudget::Fixed, 0, &mut env), JobshopStatus::InvalidArgument);
        assert!(env.is_null());
        assert_eq!(jobshop_instance_dims(ptr::null(), &mut n, &mut m), JobshopStatus::NullPointer);
        assert_eq!(jobshop_env_reset(ptr::null_mut()), JobshopStatus::NullPointer);
        jobshop_instance_free(inst);
        jobshop_instance_free(ptr::null_mut());
        jobshop_env_free(ptr::null_mut());
        jobshop_string_free(ptr::null_mut());
    }
}
