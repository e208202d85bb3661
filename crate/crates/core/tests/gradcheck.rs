mod gradcheck_cases;

#[test]
fn matmul_gradients() {
    gradcheck_cases::matmul_gradients();
}

#[test]
fn add_gradients() {
    gradcheck_cases::add_gradients();
}

#[test]
fn row_bias_gradients() {
    gradcheck_cases::row_bias_gradients();
}

#[test]
fn sub_gradients() {
    gradcheck_cases::sub_gradients();
}

#[test]
fn scale_and_shift_gradients() {
    gradcheck_cases::scale_and_shift_gradients();
}

#[test]
fn relu_gradients() {
    gradcheck_cases::relu_gradients();
}

#[test]
fn square_gradients() {
    gradcheck_cases::square_gradients();
}

#[test]
fn log_gradients() {
    gradcheck_cases::log_gradients();
}

#[test]
fn reshape_flatten_sum_mean_gradients() {
    gradcheck_cases::reshape_flatten_sum_mean_gradients();
}

#[test]
fn concat_gradients() {
    gradcheck_cases::concat_gradients();
}

#[test]
fn gaussian_nll_gradients() {
    gradcheck_cases::gaussian_nll_gradients();
}

#[test]
fn conv2d_gradients() {
    gradcheck_cases::conv2d_gradients();
}

#[test]
fn three_layer_mlp_gradients() {
    gradcheck_cases::three_layer_mlp_gradients();
}

#[test]
fn conv_stack_gradients() {
    gradcheck_cases::conv_stack_gradients();
}
