pub struct ContingencyTable;
