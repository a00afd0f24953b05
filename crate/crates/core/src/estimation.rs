pub struct FitData;
pub struct FitResult;
